r"""
patchqnn.algorithms.simulator.statevector
=========================================

Public interface of the dense statevector simulator.

The functions in this module validate their arguments and delegate the
numerical work to the compiled kernels of
:pymod:`patchqnn.algorithms.simulator.kernels`. Circuits are described by a
*template*: any object exposing ``n_qubits``, ``n_trainable``,
``n_encoding`` and a compiled ``program`` (see
:pyclass:`patchqnn.system.ansatz.CircuitTemplate`).

Expectation values are exact (no sampling). Gradients of weighted
observable sums are computed in adjoint mode; :pyfunc:`parameter_shift_gradient`
provides an independent path with shift :math:`\pi/2`.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import numba
import numpy as np

from patchqnn.algorithms.simulator.base import (_KIND_CODES, Gate,
                                                Observable, StateVector,
                                                _GateProgram,
                                                _observable_arrays)
from patchqnn.algorithms.simulator.kernels import (_adjoint_gradient,
                                                   _apply_cz, _apply_rotation,
                                                   _batch_expectations,
                                                   _batch_gradients,
                                                   _expectation, _run_program)
from patchqnn.algorithms.utils.config import N_REDUCTION_CHUNKS


def set_threads(n_threads: Optional[int]) -> int:
    """
    Set the number of threads used by the batch kernels.

    Results of every batch routine are independent of this value.

    Parameters
    ----------
    n_threads : int or None
        Requested thread count; *None* keeps the current setting.

    Returns
    -------
    int
        Active thread count.
    """
    if n_threads is not None:
        if n_threads < 1:
            raise ValueError(f"Thread count must be >= 1, got {n_threads}")
        numba.set_num_threads(min(int(n_threads), numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()


def _check_qubits(n_qubits: int, qubits: Sequence[int]) -> None:
    for q in qubits:
        if not 0 <= q < n_qubits:
            raise ValueError(f"Qubit index {q} out of range for {n_qubits} qubits")


def apply_gate(state: StateVector, gate: Gate, angle: Optional[float] = None) -> StateVector:
    r"""
    Apply a single gate and return the new state.

    Parameters
    ----------
    state : StateVector
        Input state; left untouched.
    gate : Gate
        Gate to apply.
    angle : float or None
        Rotation angle in radians; required for RY/RX and forbidden for CZ.

    Returns
    -------
    StateVector
        :math:`U|\psi\rangle`.

    Raises
    ------
    ValueError
        If a qubit index is out of range, the angle is missing, superfluous or
        non-finite.

    Examples
    --------
    >>> from patchqnn.algorithms.simulator.base import Slot
    >>> psi = apply_gate(StateVector.zero(1), Gate.ry(0, Slot("trainable", 0)), math.pi)
    >>> np.round(psi.amplitudes.real, 12)
    array([0., 1.])
    """
    _check_qubits(state.n_qubits, gate.targets)
    out = state.copy()
    if gate.kind == "CZ":
        if angle is not None:
            raise ValueError("CZ takes no angle")
        _apply_cz(out.amplitudes, out.n_qubits, gate.targets[0], gate.targets[1])
        return out

    if angle is None:
        raise ValueError(f"{gate.kind} requires an angle")
    angle = float(angle)
    if not math.isfinite(angle):
        raise ValueError(f"Rotation angle must be finite, got {angle}")
    _apply_rotation(out.amplitudes, out.n_qubits, _KIND_CODES[gate.kind], gate.targets[0], angle)
    return out


def expectation(state: StateVector, obs: Observable) -> float:
    r"""
    Exact expectation :math:`\langle\psi|O|\psi\rangle` of a single-qubit Pauli.

    Raises
    ------
    ValueError
        If the observable acts outside the register.
    """
    axes, qubits = _observable_arrays([obs], state.n_qubits)
    return float(_expectation(state.amplitudes, state.n_qubits, axes[0], qubits[0]))


def _as_angles(values, expected: int, label: str) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
    if arr.size != expected:
        raise ValueError(f"{label} angle vector has length {arr.size}, template expects {expected}")
    return arr


def _program(template) -> _GateProgram:
    return template.program


def run_circuit(template, trainable_angles, encoding_angles) -> StateVector:
    r"""
    Evolve :math:`|0^{\otimes n}\rangle` through *template* with bound angles.

    Parameters
    ----------
    template : CircuitTemplate
        Gate program with labelled slots.
    trainable_angles, encoding_angles : array_like
        Angles for the trainable and encoding slots.

    Returns
    -------
    StateVector
        Final state.

    Raises
    ------
    ValueError
        If the vector lengths differ from the template slot counts.
    """
    theta = _as_angles(trainable_angles, template.n_trainable, "Trainable")
    x = _as_angles(encoding_angles, template.n_encoding, "Encoding")
    prog = _program(template)
    amps = _run_program(template.n_qubits, prog.kinds, prog.q0, prog.q1,
                        prog.slot_kind, prog.slot_index, theta, x)
    return StateVector(template.n_qubits, amps)


def expectations(template, trainable_angles, encoding_angles,
                 observables: Sequence[Observable]) -> np.ndarray:
    """Expectation vector of *observables* on the output state of *template*."""
    state = run_circuit(template, trainable_angles, encoding_angles)
    return np.array([expectation(state, o) for o in observables])


def gradient(template, trainable_angles, encoding_angles, weights,
             observables: Sequence[Observable]) -> Tuple[np.ndarray, np.ndarray]:
    r"""
    Adjoint-mode gradient of :math:`\sum_k w_k\langle O_k\rangle`.

    Parameters
    ----------
    template : CircuitTemplate
        Circuit.
    trainable_angles, encoding_angles : array_like
        Bound angles.
    weights : array_like, shape (K,)
        Weight of each observable.
    observables : sequence of Observable
        The :math:`K` observables.

    Returns
    -------
    tuple of numpy.ndarray
        Derivatives with respect to every trainable slot and every encoding
        slot.

    Raises
    ------
    ValueError
        On slot-count or weight-count mismatch.
    """
    theta = _as_angles(trainable_angles, template.n_trainable, "Trainable")
    x = _as_angles(encoding_angles, template.n_encoding, "Encoding")
    w = np.ascontiguousarray(weights, dtype=np.float64).reshape(-1)
    if w.size != len(observables):
        raise ValueError(f"Got {w.size} weights for {len(observables)} observables")
    axes, qubits = _observable_arrays(observables, template.n_qubits)

    g_theta = np.zeros(template.n_trainable)
    g_x = np.zeros(template.n_encoding)
    prog = _program(template)
    _adjoint_gradient(template.n_qubits, prog.kinds, prog.q0, prog.q1, prog.slot_kind,
                      prog.slot_index, theta, x, axes, qubits, w, g_theta, g_x)
    return g_theta, g_x


def parameter_shift_gradient(template, trainable_angles, encoding_angles, weights,
                             observables: Sequence[Observable]) -> Tuple[np.ndarray, np.ndarray]:
    r"""
    Same quantity as :pyfunc:`gradient` by the :math:`\pi/2` parameter-shift rule.

    Costs two circuit evaluations per slot; intended for cross-checks.
    """
    theta = _as_angles(trainable_angles, template.n_trainable, "Trainable").copy()
    x = _as_angles(encoding_angles, template.n_encoding, "Encoding").copy()
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size != len(observables):
        raise ValueError(f"Got {w.size} weights for {len(observables)} observables")

    def objective() -> float:
        return float(w @ expectations(template, theta, x, observables))

    shift = 0.5 * math.pi
    out = []
    for vec in (theta, x):
        grad = np.zeros(vec.size)
        for j in range(vec.size):
            orig = vec[j]
            vec[j] = orig + shift
            plus = objective()
            vec[j] = orig - shift
            minus = objective()
            vec[j] = orig
            grad[j] = 0.5 * (plus - minus)
        out.append(grad)
    return out[0], out[1]


def batch_expectations(template, phis: np.ndarray, enc: np.ndarray,
                       observables: Sequence[Observable]) -> np.ndarray:
    r"""
    Expectations of every (sample, patch) circuit.

    Parameters
    ----------
    template : CircuitTemplate
        Circuit shared by all patches.
    phis : numpy.ndarray, shape (n_qc, n_trainable)
        Trainable angles of each patch circuit.
    enc : numpy.ndarray, shape (B, n_qc, n_encoding)
        Encoding angles per sample and patch.
    observables : sequence of Observable
        The :math:`K` readout observables.

    Returns
    -------
    numpy.ndarray, shape (B, n_qc, K)
    """
    phis = np.ascontiguousarray(phis, dtype=np.float64)
    enc = np.ascontiguousarray(enc, dtype=np.float64)
    axes, qubits = _observable_arrays(observables, template.n_qubits)
    prog = _program(template)
    return _batch_expectations(template.n_qubits, prog.kinds, prog.q0, prog.q1,
                               prog.slot_kind, prog.slot_index, phis, enc, axes, qubits)


def batch_gradients(template, phis: np.ndarray, enc: np.ndarray, weights: np.ndarray,
                    observables: Sequence[Observable],
                    n_chunks: int = N_REDUCTION_CHUNKS) -> Tuple[np.ndarray, np.ndarray]:
    r"""
    Gradients of :math:`\sum_{i,p,k} w_{ipk}\langle O_k\rangle_{ip}`.

    Returns
    -------
    g_phis : numpy.ndarray, shape (n_qc, n_trainable)
        Summed over samples in a fixed order (chunks of consecutive samples,
        then chunks in index order).
    g_enc : numpy.ndarray, shape (B, n_qc, n_encoding)
        Per-sample, per-patch encoding-angle gradients.
    """
    phis = np.ascontiguousarray(phis, dtype=np.float64)
    enc = np.ascontiguousarray(enc, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if weights.shape != enc.shape[:2] + (len(observables),):
        raise ValueError(f"Weights shape {weights.shape} does not match {enc.shape[:2] + (len(observables),)}")
    axes, qubits = _observable_arrays(observables, template.n_qubits)
    prog = _program(template)
    n_chunks = max(1, min(int(n_chunks), enc.shape[0]))
    g_chunks, g_enc = _batch_gradients(template.n_qubits, prog.kinds, prog.q0, prog.q1,
                                       prog.slot_kind, prog.slot_index, phis, enc,
                                       axes, qubits, weights, n_chunks)
    g_phis = g_chunks[:, 0, :].copy()
    for c in range(1, g_chunks.shape[1]):
        g_phis += g_chunks[:, c, :]
    return g_phis, g_enc
