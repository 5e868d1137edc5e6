r"""
patchqnn.algorithms.hessian.power
=================================

Largest-magnitude Hessian eigenvalue from gradient evaluations only.

Hessian-vector products are central differences of an analytic gradient
along the unit direction :math:`\hat v = v/\lVert v\rVert`,

.. math::

    H v \approx \frac{\nabla L(\theta+\epsilon\hat v) - \nabla L(\theta-\epsilon\hat v)}
                    {2\epsilon}\,\lVert v\rVert,
    \qquad \epsilon = 10^{-3}\,\frac{\max(1, \lVert\theta\rVert)}{\sqrt{\dim\theta}},

which is exact for quadratic losses up to rounding. Power iteration on
these products converges to the eigenvalue of largest magnitude; a negative
result is flagged rather than deflated.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Optional

import numpy as np
from scipy.linalg import eigh

from patchqnn.utils.exceptions import NumericalError
from patchqnn.utils.log_config import logger

Scope = Literal["angles_only", "angles_and_bias"]
GradientFn = Callable[[np.ndarray], np.ndarray]
HvpOperator = Callable[[np.ndarray], np.ndarray]

DENSE_MAX_DIM = 100


@dataclass(frozen=True)
class HessianConfig:
    """
    Options of a :math:`\\lambda_{max}` estimate.

    Parameters
    ----------
    scope : {"angles_and_bias", "angles_only"}
        Parameters spanned by the Hessian.
    tol : float, default 1e-3
        Relative Rayleigh-quotient change that stops the iteration.
    max_iter : int, default 100
    seed : int, default 0
        Seed of the random start vector.
    batch_size : int or None, default 10000
        Size of the seeded training subsample; *None* uses the full set.
    eps : float or None
        Finite-difference step; *None* selects the scaled default.
    max_restarts : int, default 3
        New random starts allowed when :math:`Hv = 0` at the first step.
    """
    scope: Scope = "angles_and_bias"
    tol: float = 1e-3
    max_iter: int = 100
    seed: int = 0
    batch_size: Optional[int] = 10_000
    eps: Optional[float] = None
    max_restarts: int = 3

    def __post_init__(self):
        if self.scope not in ("angles_only", "angles_and_bias"):
            raise ValueError(f"scope must be 'angles_only' or 'angles_and_bias', got {self.scope!r}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 2:
            raise ValueError(f"max_iter must be >= 2, got {self.max_iter}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.eps is not None and not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.max_restarts < 0:
            raise ValueError(f"max_restarts must be >= 0, got {self.max_restarts}")


@dataclass
class HessianReport:
    """Result and diagnostics of :pyfunc:`power_iteration`."""
    lambda_max: float
    iterations: int
    residual: float
    converged: bool
    negative_curvature: bool
    seed: int
    dim: int
    parameter_scope: Optional[str] = None
    batch_spec: dict = field(default_factory=dict)
    seconds: float = 0.0
    checkpoint_sha256: Optional[str] = None
    dense_lambda_max: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def default_eps(theta: np.ndarray) -> float:
    """Finite-difference step scaled by the parameter norm and dimension."""
    return 1e-3 * max(1.0, float(np.linalg.norm(theta))) / math.sqrt(theta.size)


def hvp(grad_fn: GradientFn, theta: np.ndarray, v: np.ndarray,
        eps: Optional[float] = None) -> np.ndarray:
    """
    Hessian-vector product by central differences of *grad_fn*.

    Parameters
    ----------
    grad_fn : callable
        Flat parameters -> flat gradient.
    theta : numpy.ndarray
        Point of evaluation.
    v : numpy.ndarray
        Direction, ``||v|| > 0``.
    eps : float, optional
        Step along the unit direction; :pyfunc:`default_eps` when omitted.

    Raises
    ------
    ValueError
        If ``v`` is zero or its shape differs from ``theta``.
    NumericalError
        If a gradient evaluation is non-finite.
    """
    theta = np.asarray(theta, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != theta.shape:
        raise ValueError(f"Direction shape {v.shape} does not match parameters {theta.shape}")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("Hessian-vector product needs a non-zero direction")
    if eps is None:
        eps = default_eps(theta)
    u = v / norm
    g_plus = np.asarray(grad_fn(theta + eps * u), dtype=np.float64)
    g_minus = np.asarray(grad_fn(theta - eps * u), dtype=np.float64)
    if not (np.all(np.isfinite(g_plus)) and np.all(np.isfinite(g_minus))):
        raise NumericalError("Non-finite gradient inside a Hessian-vector product")
    return (g_plus - g_minus) * (norm / (2.0 * eps))


def power_iteration(hvp_op: HvpOperator, dim: int, tol: float = 1e-3, max_iter: int = 100,
                    seed: int = 0, max_restarts: int = 3) -> HessianReport:
    r"""
    Dominant eigenvalue of the operator *hvp_op*.

    Iterates :math:`v \leftarrow Hv/\lVert Hv\rVert` from a seeded Gaussian
    start, with :math:`\lambda_t = v_t^T H v_t`, until
    :math:`|\lambda_t-\lambda_{t-1}|/(|\lambda_t|+10^{-12}) < tol` or
    *max_iter* products have been taken.

    Parameters
    ----------
    hvp_op : callable
        Unit vector -> :math:`Hv`.
    dim : int
        Operator dimension, ``>= 1``.
    tol, max_iter, seed, max_restarts
        See :pyclass:`HessianConfig`.

    Returns
    -------
    HessianReport
        ``parameter_scope`` and ``batch_spec`` are left for the caller.

    Raises
    ------
    NumericalError
        If :math:`Hv = 0` at the first step of every allowed start.

    Examples
    --------
    >>> A = np.diag([3.0, 1.0])
    >>> round(power_iteration(lambda v: A @ v, 2, tol=1e-10).lambda_max, 6)
    3.0
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if max_iter < 2:
        raise ValueError(f"max_iter must be >= 2, got {max_iter}")

    t0 = time.perf_counter()
    for attempt in range(max_restarts + 1):
        rng = np.random.default_rng(seed + attempt)
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        hv = np.asarray(hvp_op(v), dtype=np.float64)
        if np.linalg.norm(hv) > 0.0:
            break
        logger.warning(f"Hv = 0 for start vector {attempt} (seed {seed + attempt}); restarting")
    else:
        raise NumericalError(
            f"Hessian-vector product vanished for {max_restarts + 1} random start vectors"
        )

    lam = float(np.dot(v, hv))
    residual = math.inf
    converged = False
    iterations = 1
    while iterations < max_iter:
        norm = float(np.linalg.norm(hv))
        if norm == 0.0:
            residual, converged = 0.0, True
            break
        v = hv / norm
        hv = np.asarray(hvp_op(v), dtype=np.float64)
        iterations += 1
        new_lam = float(np.dot(v, hv))
        residual = abs(new_lam - lam) / (abs(new_lam) + 1e-12)
        lam = new_lam
        logger.debug(f"power iteration {iterations}: lambda={lam:.8e} residual={residual:.3e}")
        if residual < tol:
            converged = True
            break

    report = HessianReport(
        lambda_max=lam, iterations=iterations, residual=residual, converged=converged,
        negative_curvature=lam < 0.0, seed=seed + attempt, dim=dim,
        seconds=time.perf_counter() - t0,
    )
    if not converged:
        logger.warning(
            f"Power iteration did not converge in {max_iter} steps (residual {residual:.3e}); "
            f"reporting best estimate {lam:.6e}"
        )
    if report.negative_curvature:
        logger.warning(f"Dominant curvature is negative (lambda={lam:.6e})")
    return report


def dense_hessian_from_hvp(hvp_op: HvpOperator, dim: int, max_dim: int = DENSE_MAX_DIM) -> np.ndarray:
    r"""
    Full Hessian assembled column by column, symmetrised as :math:`(H+H^T)/2`.

    Raises
    ------
    ValueError
        If *dim* exceeds *max_dim*.
    """
    if dim > max_dim:
        raise ValueError(f"Dense Hessian limited to dim <= {max_dim}, got {dim}")
    H = np.empty((dim, dim))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = 1.0
        H[:, k] = hvp_op(e)
    return 0.5 * (H + H.T)


def dominant_eigenvalue(H: np.ndarray) -> float:
    """Eigenvalue of largest magnitude of a symmetric matrix."""
    w = eigh(H, eigvals_only=True)
    return float(w[np.argmax(np.abs(w))])
