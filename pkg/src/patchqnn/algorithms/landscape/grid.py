r"""
patchqnn.algorithms.landscape.grid
==================================

Loss surface on the principal plane of a trajectory.

The grid spans the projected trajectory with a margin on each axis; every
grid point :math:`(\alpha_a, \beta_b)` is mapped back to parameters
:math:`\bar q + \alpha_a v_1 + \beta_b v_2` and handed to a caller-supplied
loss evaluator. Points are independent and may be evaluated by a thread
pool; results are written back by index so the grid does not depend on the
completion order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from patchqnn.algorithms.landscape.pca import (PcaPlane, project_rows,
                                               reconstruct)
from patchqnn.utils.exceptions import NumericalError
from patchqnn.utils.log_config import logger

GRID_COLUMNS = ["alpha", "beta", "loss"]


@dataclass(frozen=True)
class LandscapeConfig:
    """
    Grid options.

    Parameters
    ----------
    resolution : int, default 20
        Points per axis.
    margin_frac : float, default 0.1
        Margin added on both sides of each axis, as a fraction of the
        trajectory range along that axis.
    default_half_width : float, default 1.0
        Half-width of an axis along which the trajectory does not move.
    eval_subset : int or None
        Number of training samples used by the loss evaluator (all when
        None).
    workers : int, default 1
        Threads evaluating grid points.
    """
    resolution: int = 20
    margin_frac: float = 0.1
    default_half_width: float = 1.0
    eval_subset: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {self.resolution}")
        if self.margin_frac < 0:
            raise ValueError(f"margin_frac must be >= 0, got {self.margin_frac}")
        if self.default_half_width <= 0:
            raise ValueError(f"default_half_width must be positive, got {self.default_half_width}")
        if self.eval_subset is not None and self.eval_subset < 1:
            raise ValueError(f"eval_subset must be >= 1, got {self.eval_subset}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass
class LandscapeGrid:
    """
    Loss values on the principal plane.

    ``loss[a, b]`` is the loss at ``(alpha_axis[a], beta_axis[b])``.
    """
    alpha_axis: np.ndarray
    beta_axis: np.ndarray
    loss: np.ndarray
    trajectory_2d: np.ndarray
    min_point_2d: Tuple[float, float]
    mean_loss: Optional[float]
    plane: PcaPlane = field(repr=False)

    @property
    def n_points(self) -> int:
        return int(self.loss.size)

    def to_frame(self) -> pd.DataFrame:
        """Long format, one row per grid point, alpha-major."""
        A, B = np.meshgrid(self.alpha_axis, self.beta_axis, indexing="ij")
        return pd.DataFrame({"alpha": A.ravel(), "beta": B.ravel(), "loss": self.loss.ravel()},
                            columns=GRID_COLUMNS)

    def sidecar(self) -> dict:
        """JSON-ready description of axes, ratios and projected trajectory."""
        return {
            "alpha_axis": self.alpha_axis.tolist(),
            "beta_axis": self.beta_axis.tolist(),
            "ratio1": self.plane.ratio1,
            "ratio2": self.plane.ratio2,
            "ratio_sum": self.plane.ratio1 + self.plane.ratio2,
            "variance1": self.plane.variance1,
            "variance2": self.plane.variance2,
            "trajectory_2d": self.trajectory_2d.tolist(),
            "min_point_2d": list(self.min_point_2d),
            "mean_loss": self.mean_loss,
        }


def _axis(values: np.ndarray, margin_frac: float, half_width: float, resolution: int) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    # rounding residue of a stationary trajectory counts as zero range
    if span <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        return np.linspace(lo - half_width, hi + half_width, resolution)
    m = margin_frac * span
    return np.linspace(lo - m, hi + m, resolution)


def grid_losses(plane: PcaPlane, snapshots: np.ndarray, loss_fn: Callable[[np.ndarray], float],
                cfg: Optional[LandscapeConfig] = None, min_index: Optional[int] = None,
                show_progress: bool = False, with_mean: bool = True) -> LandscapeGrid:
    """
    Evaluate *loss_fn* on a grid covering the projected trajectory.

    Parameters
    ----------
    plane : PcaPlane
        Principal plane of *snapshots*.
    snapshots : numpy.ndarray, shape (R, N)
        Trajectory rows.
    loss_fn : callable
        Maps a reconstructed parameter vector of length ``N`` to a loss.
    cfg : LandscapeConfig, optional
        Grid options; defaults when omitted.
    min_index : int, optional
        Row of *snapshots* reported as ``min_point_2d`` (default: last row).
    show_progress : bool, default False
        Display a :pydata:`tqdm` bar over grid points.
    with_mean : bool, default True
        Also evaluate the plane origin (one extra call) for ``mean_loss``.

    Returns
    -------
    LandscapeGrid

    Raises
    ------
    NumericalError
        If the evaluator returns a non-finite loss.
    """
    cfg = cfg or LandscapeConfig()
    traj = project_rows(snapshots, plane)
    res = cfg.resolution
    alpha_axis = _axis(traj[:, 0], cfg.margin_frac, cfg.default_half_width, res)
    beta_axis = _axis(traj[:, 1], cfg.margin_frac, cfg.default_half_width, res)

    def point(k: int) -> float:
        a, b = divmod(k, res)
        return float(loss_fn(reconstruct(plane, alpha_axis[a], beta_axis[b])))

    n_points = res * res
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
            it = executor.map(point, range(n_points))
            values = list(tqdm(it, total=n_points, desc="Landscape grid", disable=not show_progress))
    else:
        values = [point(k) for k in tqdm(range(n_points), desc="Landscape grid",
                                         disable=not show_progress)]
    loss = np.asarray(values, dtype=np.float64).reshape(res, res)
    if not np.all(np.isfinite(loss)):
        bad = np.argwhere(~np.isfinite(loss))[0]
        raise NumericalError(f"Non-finite loss at grid point alpha={alpha_axis[bad[0]]}, beta={beta_axis[bad[1]]}")

    mean_loss = float(loss_fn(plane.mean.copy())) if with_mean else None
    row = traj.shape[0] - 1 if min_index is None else min_index
    min_point = (float(traj[row, 0]), float(traj[row, 1]))
    logger.info(
        f"Landscape grid {res}x{res}: loss in [{loss.min():.6f}, {loss.max():.6f}], "
        f"PC1={plane.ratio1:.4f} PC2={plane.ratio2:.4f}"
    )
    return LandscapeGrid(alpha_axis, beta_axis, loss, traj, min_point, mean_loss, plane)
