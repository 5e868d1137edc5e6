r"""
patchqnn.algorithms.landscape.pca
=================================

Principal plane of an optimisation trajectory.

For a snapshot matrix :math:`Q` with :math:`R` rows (snapshots) and
:math:`N` columns (parameters), :math:`R \ll N`, the covariance
:math:`X^T X/(R-1)` of the centred rows :math:`X = Q - \bar q` is never
formed. The :math:`R\times R` Gram matrix :math:`G = X X^T` shares its
non-zero eigenvalues :math:`\lambda_i`, and the principal directions are
:math:`v_i = X^T u_i / \sqrt{\lambda_i}`. Contribution ratios are
:math:`\lambda_i / \operatorname{tr} G`.

Directions are oriented so that the last snapshot has non-negative
coordinates along both :math:`v_1` and :math:`v_2`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import eigh

from patchqnn.utils.log_config import logger

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class PcaPlane:
    """
    Plane spanned by the two leading principal directions.

    Parameters
    ----------
    mean : numpy.ndarray, shape (N,)
        Trajectory mean, the plane origin.
    v1, v2 : numpy.ndarray, shape (N,)
        Orthonormal directions.
    ratio1, ratio2 : float
        Fractions of the total variance explained by each direction.
    variance1, variance2 : float
        Corresponding covariance eigenvalues (``ddof=1``).
    """
    mean: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    ratio1: float
    ratio2: float
    variance1: float = 0.0
    variance2: float = 0.0

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def basis(self) -> np.ndarray:
        """Directions as columns, shape (N, 2)."""
        return np.stack([self.v1, self.v2], axis=1)

    def check(self, tol: float = 1e-10) -> None:
        """
        Verify orthonormality and ratio ordering.

        Raises
        ------
        ValueError
            If an invariant is violated.
        """
        gram = self.basis.T @ self.basis
        if not np.allclose(gram, np.eye(2), atol=tol, rtol=0.0):
            raise ValueError(f"PCA directions are not orthonormal: Gram matrix {gram.tolist()}")
        if not (0.0 <= self.ratio2 <= self.ratio1 <= 1.0 and self.ratio1 + self.ratio2 <= 1.0 + tol):
            raise ValueError(f"Invalid contribution ratios {self.ratio1}, {self.ratio2}")


def _unit_complement(v: np.ndarray, dim: int) -> np.ndarray:
    # First canonical axis with a usable component orthogonal to v.
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = 1.0
        e -= np.dot(e, v) * v
        norm = np.linalg.norm(e)
        if norm > 1e-6:
            return e / norm
    raise ValueError("No orthogonal complement in one dimension")


def pca2(Q: np.ndarray) -> PcaPlane:
    """
    Mean-centred PCA of the rows of *Q*, keeping two components.

    Parameters
    ----------
    Q : numpy.ndarray, shape (R, N)
        Snapshots as rows, ``R >= 3`` and ``N >= 2``.

    Returns
    -------
    PcaPlane

    Raises
    ------
    ValueError
        If *Q* has fewer than three rows or two columns, or non-finite
        entries.

    Notes
    -----
    Components whose Gram eigenvalue is below ``RANK_RTOL * lambda_max``
    carry no variance. In that case the missing direction is filled by an
    orthonormalised canonical axis and its ratio is 0; identical rows give
    ``v1 = e_0``, ``v2 = e_1`` and both ratios 0.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] < 3 or Q.shape[1] < 2:
        raise ValueError(f"PCA needs at least 3 snapshots of length >= 2, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise ValueError("Snapshot matrix contains non-finite values")

    R, N = Q.shape
    mean = Q.mean(axis=0)
    X = Q - mean
    G = X @ X.T
    lam, U = eigh(G)
    lam, U = lam[::-1], U[:, ::-1]
    # identical rows: centring may leave rounding residue, treat as zero variance
    total = 0.0 if np.all(np.ptp(Q, axis=0) == 0.0) else float(np.trace(G))
    cutoff = RANK_RTOL * max(float(lam[0]), 0.0)

    dirs, ratios, variances = [], [], []
    for i in range(2):
        if total > 0.0 and lam[i] > cutoff:
            v = X.T @ U[:, i] / np.sqrt(lam[i])
            v /= np.linalg.norm(v)
            if dirs:
                v -= np.dot(v, dirs[0]) * dirs[0]
                v /= np.linalg.norm(v)
            dirs.append(v)
            ratios.append(float(lam[i] / total))
            variances.append(float(lam[i] / (R - 1)))
        else:
            if dirs:
                v = _unit_complement(dirs[0], N)
            else:
                v = np.zeros(N)
                v[0] = 1.0
            dirs.append(v)
            ratios.append(0.0)
            variances.append(0.0)

    if ratios[0] == 0.0:
        logger.warning("Degenerate trajectory: all snapshots coincide; using canonical axes")
    elif ratios[1] == 0.0:
        logger.warning("Trajectory has a single principal direction; second axis carries no variance")

    last = X[-1]
    for i in range(2):
        if np.dot(last, dirs[i]) < 0.0:
            dirs[i] = -dirs[i]

    plane = PcaPlane(mean, dirs[0], dirs[1], ratios[0], ratios[1], variances[0], variances[1])
    plane.check()
    return plane


def project(q: np.ndarray, plane: PcaPlane) -> Tuple[float, float]:
    r"""
    Coordinates :math:`(\alpha, \beta) = ((q-\bar q)\cdot v_1, (q-\bar q)\cdot v_2)`.

    Raises
    ------
    ValueError
        On length mismatch.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape != plane.mean.shape:
        raise ValueError(f"Vector of shape {q.shape} does not match plane dimension {plane.dim}")
    d = q - plane.mean
    return float(np.dot(d, plane.v1)), float(np.dot(d, plane.v2))


def project_rows(Q: np.ndarray, plane: PcaPlane) -> np.ndarray:
    """:pyfunc:`project` applied to every row, shape (R, 2)."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] != plane.dim:
        raise ValueError(f"Snapshot matrix of shape {Q.shape} does not match plane dimension {plane.dim}")
    return (Q - plane.mean) @ plane.basis


def reconstruct(plane: PcaPlane, alpha: float, beta: float) -> np.ndarray:
    r""":math:`\bar q + \alpha v_1 + \beta v_2`."""
    return plane.mean + alpha * plane.v1 + beta * plane.v2
