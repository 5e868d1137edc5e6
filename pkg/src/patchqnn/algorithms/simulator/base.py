r"""
patchqnn.algorithms.simulator.base
==================================

Value types of the dense statevector simulator.

* :pyclass:`StateVector` - amplitudes of an :math:`n`-qubit pure state.
* :pyclass:`Gate` - one instruction of a circuit program: an :math:`R_y` or
  :math:`R_x` rotation bound to a parameter slot, or a parameter-free CZ.
* :pyclass:`Observable` - a single-qubit Pauli :math:`X_q` or :math:`Z_q`.

Conventions
-----------
Rotations are :math:`R_y(\theta)=e^{-i\theta Y/2}` and
:math:`R_x(\theta)=e^{-i\theta X/2}`. Qubit ordering is little-endian: qubit
:math:`q` is bit :math:`q` of the amplitude index, so qubit 0 is the least
significant bit.

Circuits are lowered to a :pyclass:`_GateProgram`, a struct of flat integer
arrays consumed by the :pymod:`numba` kernels in
:pymod:`patchqnn.algorithms.simulator.kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from patchqnn.algorithms.utils.config import NORM_TOL

KIND_RY = 0
KIND_RX = 1
KIND_CZ = 2

SLOT_NONE = -1
SLOT_TRAINABLE = 0
SLOT_ENCODING = 1

AXIS_X = 0
AXIS_Z = 1

_KIND_CODES = {"RY": KIND_RY, "RX": KIND_RX, "CZ": KIND_CZ}
_SLOT_CODES = {"trainable": SLOT_TRAINABLE, "encoding": SLOT_ENCODING}
_AXIS_CODES = {"X": AXIS_X, "Z": AXIS_Z}


class Slot(NamedTuple):
    """Parameter slot of a rotation: ``kind`` is ``"trainable"`` or ``"encoding"``."""
    kind: Literal["trainable", "encoding"]
    index: int


@dataclass(frozen=True)
class Gate:
    r"""
    A single circuit instruction.

    Parameters
    ----------
    kind : {"RY", "RX", "CZ"}
        Gate type.
    targets : tuple[int, ...]
        One qubit for rotations, an ordered pair of distinct qubits for CZ.
    slot : Slot or None
        Angle source of a rotation; must be *None* for CZ.

    Raises
    ------
    ValueError
        If the slot or target arity does not match *kind*.
    """
    kind: Literal["RY", "RX", "CZ"]
    targets: Tuple[int, ...]
    slot: Optional[Slot] = None

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"Unknown gate kind: {self.kind!r}")
        if any(q < 0 for q in self.targets):
            raise ValueError(f"Negative qubit index in {self.targets}")
        if self.kind == "CZ":
            if self.slot is not None:
                raise ValueError("CZ gates carry no parameter slot")
            if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
                raise ValueError(f"CZ needs two distinct targets, got {self.targets}")
        else:
            if self.slot is None:
                raise ValueError(f"{self.kind} gates need a parameter slot")
            if self.slot.kind not in _SLOT_CODES or self.slot.index < 0:
                raise ValueError(f"Invalid slot {self.slot}")
            if len(self.targets) != 1:
                raise ValueError(f"{self.kind} acts on exactly one qubit, got {self.targets}")

    @classmethod
    def ry(cls, qubit: int, slot: Slot) -> "Gate":
        return cls("RY", (qubit,), slot)

    @classmethod
    def rx(cls, qubit: int, slot: Slot) -> "Gate":
        return cls("RX", (qubit,), slot)

    @classmethod
    def cz(cls, a: int, b: int) -> "Gate":
        return cls("CZ", (a, b))


@dataclass(frozen=True)
class Observable:
    """Single-qubit Pauli observable with eigenvalues :math:`\\pm 1`."""
    axis: Literal["X", "Z"]
    qubit: int

    def __post_init__(self):
        if self.axis not in _AXIS_CODES:
            raise ValueError(f"Observable axis must be 'X' or 'Z', got {self.axis!r}")
        if self.qubit < 0:
            raise ValueError(f"Negative qubit index {self.qubit}")

    def __str__(self) -> str:
        return f"{self.axis}{self.qubit}"


@dataclass
class StateVector:
    r"""
    Dense pure state of ``n_qubits`` qubits.

    Parameters
    ----------
    n_qubits : int
        Number of qubits :math:`n \ge 1`.
    amplitudes : numpy.ndarray, shape (:math:`2^n`,), complex128
        Amplitudes in little-endian order.

    Raises
    ------
    ValueError
        If the amplitude vector does not have length :math:`2^n`.
    """
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"Amplitude vector must have length 2**{self.n_qubits}={1 << self.n_qubits}, "
                f"got shape {self.amplitudes.shape}"
            )

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        """The computational basis state :math:`|0^{\\otimes n}\\rangle`."""
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm_squared - 1.0) < tol

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


class _GateProgram(NamedTuple):
    kinds: np.ndarray       # int64 gate kind codes
    q0: np.ndarray          # first target
    q1: np.ndarray          # second target (CZ) or -1
    slot_kind: np.ndarray   # SLOT_* code
    slot_index: np.ndarray  # index into the trainable/encoding angle vector


def _compile_program(gates: Sequence[Gate]) -> _GateProgram:
    n = len(gates)
    kinds = np.empty(n, dtype=np.int64)
    q0 = np.empty(n, dtype=np.int64)
    q1 = np.full(n, -1, dtype=np.int64)
    slot_kind = np.full(n, SLOT_NONE, dtype=np.int64)
    slot_index = np.full(n, -1, dtype=np.int64)
    for g, gate in enumerate(gates):
        kinds[g] = _KIND_CODES[gate.kind]
        q0[g] = gate.targets[0]
        if gate.kind == "CZ":
            q1[g] = gate.targets[1]
        else:
            slot_kind[g] = _SLOT_CODES[gate.slot.kind]
            slot_index[g] = gate.slot.index
    return _GateProgram(kinds, q0, q1, slot_kind, slot_index)


def _observable_arrays(observables: Sequence[Observable], n_qubits: int) -> Tuple[np.ndarray, np.ndarray]:
    axes = np.empty(len(observables), dtype=np.int64)
    qubits = np.empty(len(observables), dtype=np.int64)
    for k, obs in enumerate(observables):
        if obs.qubit >= n_qubits:
            raise ValueError(f"Observable {obs} acts outside a {n_qubits}-qubit register")
        axes[k] = _AXIS_CODES[obs.axis]
        qubits[k] = obs.qubit
    return axes, qubits
