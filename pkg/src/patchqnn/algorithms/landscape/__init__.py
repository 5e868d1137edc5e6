from .grid import LandscapeConfig, LandscapeGrid, grid_losses
from .pca import PcaPlane, pca2, project, project_rows, reconstruct

__all__ = [
    "LandscapeConfig",
    "LandscapeGrid",
    "PcaPlane",
    "grid_losses",
    "pca2",
    "project",
    "project_rows",
    "reconstruct",
]
