"""
Public API for the ``algorithms`` package.
"""

from .hessian.power import HessianConfig, HessianReport, power_iteration
from .landscape.grid import LandscapeConfig, LandscapeGrid, grid_losses
from .landscape.pca import PcaPlane, pca2
from .optim.adam import AdamState, adam_step
from .optim.schedule import LrSchedule, lr_at

__all__ = [
    "AdamState",
    "adam_step",
    "LrSchedule",
    "lr_at",
    "PcaPlane",
    "pca2",
    "LandscapeConfig",
    "LandscapeGrid",
    "grid_losses",
    "HessianConfig",
    "HessianReport",
    "power_iteration",
]
