from .power import (HessianConfig, HessianReport, default_eps,
                    dense_hessian_from_hvp, dominant_eigenvalue, hvp,
                    power_iteration)

__all__ = [
    "HessianConfig",
    "HessianReport",
    "default_eps",
    "dense_hessian_from_hvp",
    "dominant_eigenvalue",
    "hvp",
    "power_iteration",
]
