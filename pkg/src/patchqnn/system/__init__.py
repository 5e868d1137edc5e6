"""
Public API for the ``system`` package.

This module re-exports the classifier building blocks so that users can
simply write::

    from patchqnn.system import build_qnn_template, PatchConfig, ModelConfig

instead of navigating the full internal hierarchy (``patchqnn.system.ansatz``,
``patchqnn.system.model`` ...).
"""

# Circuit template
from .ansatz import (CircuitTemplate, build_encoding_block,
                     build_entangling_block, build_qnn_template,
                     count_parameters)
# Data pipeline
from .data import (PatchConfig, PreparedDataset, RawDataset, avg_pool_2x2,
                   extract_patches, load_idx, normalize, prepare)
# Classifier
from .model import (ModelConfig, ModelParams, Prediction, evaluate, forward,
                    gradient, loss)
# Training
from .trainer import TrainConfig, TrajectoryLog, init_params, train

__all__ = [
    # Ansatz
    "CircuitTemplate",
    "build_encoding_block",
    "build_entangling_block",
    "build_qnn_template",
    "count_parameters",
    # Data
    "RawDataset",
    "PatchConfig",
    "PreparedDataset",
    "load_idx",
    "avg_pool_2x2",
    "normalize",
    "prepare",
    "extract_patches",
    # Model
    "ModelConfig",
    "ModelParams",
    "Prediction",
    "forward",
    "loss",
    "gradient",
    "evaluate",
    # Trainer
    "TrainConfig",
    "TrajectoryLog",
    "init_params",
    "train",
]
