"""
Dense statevector simulator for RY/RX/CZ circuits.
"""

from .base import Gate, Observable, Slot, StateVector
from .statevector import (apply_gate, batch_expectations, batch_gradients,
                          expectation, expectations, gradient,
                          parameter_shift_gradient, run_circuit, set_threads)

__all__ = [
    "Gate",
    "Observable",
    "Slot",
    "StateVector",
    "apply_gate",
    "batch_expectations",
    "batch_gradients",
    "expectation",
    "expectations",
    "gradient",
    "parameter_shift_gradient",
    "run_circuit",
    "set_threads",
]
