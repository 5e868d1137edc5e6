"""
Experimental constants of the distributed patch QNN study.

The values collected here are the defaults of every configuration object in
the package: the preprocessing geometry, the readout scale, the observable
set, the per-depth initial learning rates and the exact variational parameter
counts of the reference architecture. All other modules read them from
:pyclass:`Constants` rather than repeating literals.
"""

import math
from typing import Dict, Tuple


class Constants:
    """Class containing the constants of the reference experiments."""

    # MNIST pixels
    PIXEL_MAX: float = 255.0

    # Preprocessing
    IMAGE_SIDE: int = 14  # after 2x2 average pooling
    PATCH_SIDE: int = 8
    ANGLE_RANGE: float = math.pi / 4  # normalised pixels lie in [0, pi/4]

    # Architecture and readout
    N_QUBITS: int = 8
    N_CLASS: int = 10
    SOFTMAX_SCALE: float = 100.0
    OBSERVABLES: Tuple[Tuple[str, int], ...] = (
        ("X", 0), ("X", 1), ("X", 2), ("X", 3), ("X", 4),
        ("Z", 0), ("Z", 1), ("Z", 2), ("Z", 3), ("Z", 4),
    )
    INIT_ANGLE_RANGE: Tuple[float, float] = (0.0, math.pi)

    # Training protocol
    EPOCHS: int = 50
    BATCH_SIZE: int = 1000
    LR_MIN: float = 0.0

    # Strides producing n_qc patches on a 14x14 image with 8x8 patches
    STRIDE_BY_NQC: Dict[int, int] = {4: 6, 9: 3, 16: 2}

    # Initial Adam learning rate by ansatz depth d
    LR_BY_DEPTH: Dict[int, float] = {
        50: 1.0e-2,
        100: 5.0e-3,
        150: 2.5e-3,
        200: 1.0e-3,
    }

    # Number of variational parameters in QNNs, keyed by (n_qc, d)
    REFERENCE_PARAMETER_COUNTS: Dict[Tuple[int, int], int] = {
        (4, 50): 10112, (4, 100): 19712, (4, 150): 29312, (4, 200): 38912,
        (9, 50): 22752, (9, 100): 44352, (9, 150): 65952, (9, 200): 87552,
        (16, 50): 40448, (16, 100): 78848, (16, 150): 117248, (16, 200): 155648,
    }

    @classmethod
    def get_learning_rate(cls, depth: int) -> float:
        """
        Get the initial learning rate for an ansatz depth.

        Parameters
        ----------
        depth : int
            Number of entangling blocks per group, d.

        Returns
        -------
        float
            Tabulated learning rate.

        Raises
        ------
        KeyError
            If no learning rate is tabulated for *depth*.
        """
        if depth not in cls.LR_BY_DEPTH:
            raise KeyError(
                f"No default learning rate for depth d={depth}; "
                f"tabulated depths are {sorted(cls.LR_BY_DEPTH)}"
            )
        return cls.LR_BY_DEPTH[depth]

    @classmethod
    def get_stride(cls, n_qc: int) -> int:
        """Stride D giving *n_qc* patches on the reference image and patch sides."""
        if n_qc not in cls.STRIDE_BY_NQC:
            raise KeyError(
                f"No reference stride for n_qc={n_qc}; known values are {sorted(cls.STRIDE_BY_NQC)}"
            )
        return cls.STRIDE_BY_NQC[n_qc]
