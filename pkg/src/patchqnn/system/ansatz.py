r"""
patchqnn.system.ansatz
======================

Hardware-efficient circuit template shared by every patch QNN.

The template is the concatenation

.. math::

    [E^{\times d},\; \mathrm{Enc},\; E^{\times d},\; \mathrm{Enc},\; E^{\times d}]

where an entangling block :math:`E` is an :math:`R_x` layer and an
:math:`R_y` layer of trainable rotations followed by a CZ ring, and an
encoding block :math:`\mathrm{Enc}` repeats twice the six-layer sequence
``[RY(t), RX(x), RY(t), RX(t), RY(x), RX(t)]`` (``t`` trainable, ``x``
encoding) before its CZ ring. The CZ ring of the very last entangling block
is omitted.

Slot numbering
--------------
Trainable and encoding slots are numbered independently in circuit order,
layer by layer and qubit index ascending within a layer. Feature :math:`f`
of a flattened patch is therefore bound to the :math:`f`-th encoding
rotation met by the circuit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Sequence, Tuple

from patchqnn.algorithms.simulator.base import (Gate, Slot, _compile_program,
                                                _GateProgram)
from patchqnn.utils.log_config import logger

# Layer pattern of one encoding sequence: (gate kind, slot kind)
_ENCODING_SEQUENCE: Tuple[Tuple[str, str], ...] = (
    ("RY", "trainable"),
    ("RX", "encoding"),
    ("RY", "trainable"),
    ("RX", "trainable"),
    ("RY", "encoding"),
    ("RX", "trainable"),
)


def _check_width(n: int) -> None:
    if n < 1:
        raise ValueError(f"Number of qubits must be >= 1, got {n}")


def cz_ring(n: int) -> List[Gate]:
    r"""
    CZ gates between neighbours :math:`(i, (i+1) \bmod n)`.

    Pairs that coincide under the periodic wrap-around are emitted once, so
    ``n=1`` gives no gate and ``n=2`` a single ``CZ(0, 1)``.
    """
    _check_width(n)
    gates: List[Gate] = []
    seen = set()
    for i in range(n):
        j = (i + 1) % n
        pair = frozenset((i, j))
        if i == j or pair in seen:
            continue
        seen.add(pair)
        gates.append(Gate.cz(i, j))
    return gates


def _rotation_layer(kind: str, slot_kind: str, n: int, first: int) -> List[Gate]:
    make = Gate.ry if kind == "RY" else Gate.rx
    return [make(q, Slot(slot_kind, first + q)) for q in range(n)]


def build_entangling_block(n: int, first_trainable: int, include_cz: bool = True) -> List[Gate]:
    """
    RX layer and RY layer of trainable rotations, then a CZ ring if *include_cz*.

    Parameters
    ----------
    n : int
        Number of qubits.
    first_trainable : int
        Index of the first trainable slot used by the block.
    include_cz : bool, default True
        Append the CZ ring.

    Returns
    -------
    list[Gate]
        The block's gates; it consumes ``2 n`` trainable slots.
    """
    _check_width(n)
    gates = _rotation_layer("RX", "trainable", n, first_trainable)
    gates += _rotation_layer("RY", "trainable", n, first_trainable + n)
    if include_cz:
        gates += cz_ring(n)
    return gates


def build_encoding_block(n: int, first_trainable: int, first_encoding: int,
                         cz_per_sequence: bool = False) -> List[Gate]:
    """
    Two six-layer rotation sequences mixing trainable and encoding layers.

    Parameters
    ----------
    n : int
        Number of qubits.
    first_trainable, first_encoding : int
        First slot index of each kind used by the block.
    cz_per_sequence : bool, default False
        Place a CZ ring after each sequence instead of a single ring after
        both.

    Returns
    -------
    list[Gate]
        The block's gates; it consumes ``8 n`` trainable and ``4 n`` encoding
        slots.
    """
    _check_width(n)
    gates: List[Gate] = []
    t, x = first_trainable, first_encoding
    for rep in range(2):
        for kind, slot_kind in _ENCODING_SEQUENCE:
            if slot_kind == "trainable":
                gates += _rotation_layer(kind, slot_kind, n, t)
                t += n
            else:
                gates += _rotation_layer(kind, slot_kind, n, x)
                x += n
        if cz_per_sequence or rep == 1:
            gates += cz_ring(n)
    return gates


@dataclass(frozen=True)
class CircuitTemplate:
    r"""
    Ordered gate program with labelled parameter slots.

    Parameters
    ----------
    n_qubits : int
        Register width.
    gates : tuple[Gate, ...]
        Instructions in application order.
    n_trainable, n_encoding : int
        Number of distinct trainable and encoding slots.

    Raises
    ------
    ValueError
        If a gate acts outside the register or the slot indices of a kind are
        not exactly ``0 .. count-1`` each used once.
    """
    n_qubits: int
    gates: Tuple[Gate, ...]
    n_trainable: int
    n_encoding: int
    depth: int = field(default=0, compare=False)
    encoding_cz_per_sequence: bool = field(default=False, compare=False)

    def __post_init__(self):
        _check_width(self.n_qubits)
        object.__setattr__(self, "gates", tuple(self.gates))
        used = {"trainable": [], "encoding": []}
        for gate in self.gates:
            if max(gate.targets) >= self.n_qubits:
                raise ValueError(f"Gate {gate} acts outside a {self.n_qubits}-qubit register")
            if gate.slot is not None:
                used[gate.slot.kind].append(gate.slot.index)
        for kind, count in (("trainable", self.n_trainable), ("encoding", self.n_encoding)):
            if sorted(used[kind]) != list(range(count)):
                raise ValueError(
                    f"{kind} slots must be 0..{count - 1} each used once; "
                    f"got {len(used[kind])} uses"
                )

    @cached_property
    def program(self) -> _GateProgram:
        """Flat integer program consumed by the simulator kernels."""
        return _compile_program(self.gates)

    @property
    def n_cz(self) -> int:
        return sum(1 for g in self.gates if g.kind == "CZ")

    def __len__(self) -> int:
        return len(self.gates)

    def __repr__(self) -> str:
        return (f"CircuitTemplate(n_qubits={self.n_qubits}, depth={self.depth}, "
                f"gates={len(self.gates)}, n_trainable={self.n_trainable}, "
                f"n_encoding={self.n_encoding})")


def build_qnn_template(n: int, d: int, encoding_cz_per_sequence: bool = False) -> CircuitTemplate:
    r"""
    Assemble :math:`[E^{\times d}, \mathrm{Enc}, E^{\times d}, \mathrm{Enc}, E^{\times d}]`.

    Parameters
    ----------
    n : int
        Number of qubits, :math:`n \ge 1`.
    d : int
        Entangling blocks per group, :math:`d \ge 1`.
    encoding_cz_per_sequence : bool, default False
        Forwarded to :pyfunc:`build_encoding_block`.

    Returns
    -------
    CircuitTemplate
        Template with ``6 d n + 16 n`` trainable and ``8 n`` encoding slots.

    Examples
    --------
    >>> build_qnn_template(8, 50).n_trainable
    2528
    """
    _check_width(n)
    if d < 1:
        raise ValueError(f"Depth d must be >= 1, got {d}")

    gates: List[Gate] = []
    t = x = 0
    for group in range(3):
        for block in range(d):
            last = group == 2 and block == d - 1
            gates += build_entangling_block(n, t, include_cz=not last)
            t += 2 * n
        if group < 2:
            gates += build_encoding_block(n, t, x, cz_per_sequence=encoding_cz_per_sequence)
            t += 8 * n
            x += 4 * n

    template = CircuitTemplate(n, tuple(gates), t, x, depth=d,
                               encoding_cz_per_sequence=encoding_cz_per_sequence)
    logger.debug(f"Built {template!r}")
    return template


def count_parameters(n: int, d: int, n_qc: int = 1) -> int:
    """Trainable angle count of *n_qc* independent QNNs of width *n* and depth *d*."""
    _check_width(n)
    if d < 1 or n_qc < 1:
        raise ValueError(f"Need d >= 1 and n_qc >= 1, got d={d}, n_qc={n_qc}")
    return n_qc * (6 * d * n + 16 * n)


def encoding_gates(template: CircuitTemplate) -> Sequence[Gate]:
    """Encoding rotations of *template* ordered by slot index."""
    gates = [g for g in template.gates if g.slot is not None and g.slot.kind == "encoding"]
    return sorted(gates, key=lambda g: g.slot.index)
