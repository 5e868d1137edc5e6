"""utils
========
Convenient re-exports for the most frequently accessed helper utilities.

Typical usage examples::

    from patchqnn.utils import Constants

    lr = Constants.get_learning_rate(50)
"""

from .config import RunConfig
from .constants import Constants
from .exceptions import (ArtifactMismatchError, ConfigError, DataFormatError,
                         NumericalError, PatchQNNError)

__all__ = [
    "Constants",
    "RunConfig",
    "PatchQNNError",
    "ConfigError",
    "DataFormatError",
    "NumericalError",
    "ArtifactMismatchError",
]
