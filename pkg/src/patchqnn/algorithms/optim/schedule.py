r"""
patchqnn.algorithms.optim.schedule
==================================

Per-epoch cosine annealing, optionally with warm restarts.

.. math::

    \eta(\tau) = \eta_{min} + \tfrac12(\eta_{init}-\eta_{min})
                 \bigl(1 + \cos(\pi\,\tau / T_{eff})\bigr)

Without restarts :math:`T_{eff}=T` and :math:`\tau=\min(e, T)`; with a
restart period :math:`R` the schedule restarts every :math:`R` epochs,
:math:`T_{eff}=R` and :math:`\tau = e \bmod R`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from patchqnn.utils.constants import Constants


@dataclass(frozen=True)
class LrSchedule:
    """
    Cosine annealing parameters.

    Parameters
    ----------
    lr_init : float
        Rate at epoch 0.
    lr_min : float, default 0
        Floor reached at the end of a cycle.
    epochs : int, default 50
        Annealing horizon :math:`T`.
    restart_period : int or None
        Warm-restart period in epochs.
    """
    lr_init: float
    lr_min: float = Constants.LR_MIN
    epochs: int = Constants.EPOCHS
    restart_period: Optional[int] = None

    def __post_init__(self):
        if not (self.lr_init > self.lr_min >= 0.0):
            raise ValueError(
                f"Need lr_init > lr_min >= 0, got lr_init={self.lr_init}, lr_min={self.lr_min}"
            )
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.restart_period is not None and self.restart_period < 1:
            raise ValueError(f"restart_period must be >= 1, got {self.restart_period}")


def lr_at(schedule: LrSchedule, epoch: int) -> float:
    """
    Learning rate used throughout *epoch* (0-based).

    Examples
    --------
    >>> lr_at(LrSchedule(1e-2, epochs=50), 0)
    0.01
    """
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    if schedule.restart_period is None:
        period = schedule.epochs
        tau = min(epoch, period)
    else:
        period = schedule.restart_period
        tau = epoch % period
    cos = 0.5 * (1.0 + math.cos(math.pi * tau / period))
    return schedule.lr_min + (schedule.lr_init - schedule.lr_min) * cos
