r"""
patchqnn.algorithms.simulator.kernels
=====================================

Numba kernels of the statevector simulator.

All routines work in place on one-dimensional ``complex128`` amplitude
arrays in little-endian qubit order and are compiled in nopython mode with
:pyfunc:`numba.njit`. The batch kernels :pyfunc:`_batch_expectations` and
:pyfunc:`_batch_gradients` distribute independent circuit evaluations with
:pyfunc:`numba.prange`; every output cell is owned by exactly one iteration,
so results do not depend on the number of threads.

Gradients use adjoint-mode differentiation: one forward sweep to the final
state :math:`|\phi\rangle`, the weighted observable applied once to give
:math:`|\lambda\rangle = O_w|\phi\rangle`, then one backward sweep that
un-applies every gate to both vectors. For a rotation
:math:`U=e^{-i\theta G/2}` the derivative of :math:`\langle O_w\rangle` is
:math:`2\,\mathrm{Re}\,\langle\lambda|(-\tfrac{i}{2}G)|\phi\rangle` taken
with both vectors positioned just after the gate.
"""

import math

import numpy as np
from numba import njit, prange

from patchqnn.algorithms.simulator.base import (AXIS_Z, KIND_CZ, KIND_RY,
                                                SLOT_TRAINABLE)
from patchqnn.algorithms.utils.config import FASTMATH


@njit(cache=False, fastmath=FASTMATH)
def _apply_rotation(state: np.ndarray, n_qubits: int, kind: int, qubit: int, angle: float) -> None:
    c = math.cos(0.5 * angle)
    s = math.sin(0.5 * angle)
    stride = 1 << qubit
    low = stride - 1
    for g in range(1 << (n_qubits - 1)):
        i0 = ((g >> qubit) << (qubit + 1)) + (g & low)
        i1 = i0 + stride
        a0 = state[i0]
        a1 = state[i1]
        if kind == KIND_RY:
            state[i0] = c * a0 - s * a1
            state[i1] = s * a0 + c * a1
        else:
            state[i0] = c * a0 - 1j * s * a1
            state[i1] = c * a1 - 1j * s * a0


@njit(cache=False, fastmath=FASTMATH)
def _apply_cz(state: np.ndarray, n_qubits: int, a: int, b: int) -> None:
    mask = (1 << a) | (1 << b)
    for i in range(1 << n_qubits):
        if (i & mask) == mask:
            state[i] = -state[i]


@njit(cache=False, fastmath=FASTMATH)
def _expectation(state: np.ndarray, n_qubits: int, axis: int, qubit: int) -> float:
    acc = 0.0
    if axis == AXIS_Z:
        for i in range(1 << n_qubits):
            p = state[i].real * state[i].real + state[i].imag * state[i].imag
            if (i >> qubit) & 1:
                acc -= p
            else:
                acc += p
        return acc

    stride = 1 << qubit
    low = stride - 1
    for g in range(1 << (n_qubits - 1)):
        i0 = ((g >> qubit) << (qubit + 1)) + (g & low)
        i1 = i0 + stride
        a0 = state[i0]
        a1 = state[i1]
        acc += 2.0 * (a0.real * a1.real + a0.imag * a1.imag)
    return acc


@njit(cache=False, fastmath=FASTMATH)
def _apply_weighted_observable(state: np.ndarray, n_qubits: int, axes: np.ndarray,
                               qubits: np.ndarray, weights: np.ndarray) -> np.ndarray:
    out = np.zeros_like(state)
    for k in range(axes.shape[0]):
        w = weights[k]
        if w == 0.0:
            continue
        q = qubits[k]
        if axes[k] == AXIS_Z:
            for i in range(1 << n_qubits):
                if (i >> q) & 1:
                    out[i] -= w * state[i]
                else:
                    out[i] += w * state[i]
        else:
            stride = 1 << q
            low = stride - 1
            for g in range(1 << (n_qubits - 1)):
                i0 = ((g >> q) << (q + 1)) + (g & low)
                i1 = i0 + stride
                out[i0] += w * state[i1]
                out[i1] += w * state[i0]
    return out


@njit(cache=False, fastmath=FASTMATH)
def _generator_overlap(lam: np.ndarray, phi: np.ndarray, n_qubits: int, kind: int, qubit: int) -> float:
    # 2 Re <lam| (-i/2) G |phi>, G = Y for RY and X for RX
    stride = 1 << qubit
    low = stride - 1
    acc = 0.0
    for g in range(1 << (n_qubits - 1)):
        i0 = ((g >> qubit) << (qubit + 1)) + (g & low)
        i1 = i0 + stride
        l0 = lam[i0]
        l1 = lam[i1]
        p0 = phi[i0]
        p1 = phi[i1]
        if kind == KIND_RY:
            acc += (l1.conjugate() * p0 - l0.conjugate() * p1).real
        else:
            acc += (l0.conjugate() * p1 + l1.conjugate() * p0).imag
    return acc


@njit(cache=False, fastmath=FASTMATH)
def _angle(slot_kind: int, slot_index: int, theta: np.ndarray, x: np.ndarray) -> float:
    if slot_kind == SLOT_TRAINABLE:
        return theta[slot_index]
    return x[slot_index]


@njit(cache=False, fastmath=FASTMATH)
def _run_program(n_qubits: int, kinds: np.ndarray, q0: np.ndarray, q1: np.ndarray,
                 slot_kind: np.ndarray, slot_index: np.ndarray,
                 theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    state = np.zeros(1 << n_qubits, dtype=np.complex128)
    state[0] = 1.0
    for g in range(kinds.shape[0]):
        if kinds[g] == KIND_CZ:
            _apply_cz(state, n_qubits, q0[g], q1[g])
        else:
            _apply_rotation(state, n_qubits, kinds[g], q0[g],
                            _angle(slot_kind[g], slot_index[g], theta, x))
    return state


@njit(cache=False, fastmath=FASTMATH)
def _adjoint_gradient(n_qubits: int, kinds: np.ndarray, q0: np.ndarray, q1: np.ndarray,
                      slot_kind: np.ndarray, slot_index: np.ndarray,
                      theta: np.ndarray, x: np.ndarray,
                      axes: np.ndarray, qubits: np.ndarray, weights: np.ndarray,
                      g_theta: np.ndarray, g_x: np.ndarray) -> None:
    # Accumulates d(sum_k w_k <O_k>)/d(angle) into g_theta / g_x.
    phi = _run_program(n_qubits, kinds, q0, q1, slot_kind, slot_index, theta, x)
    lam = _apply_weighted_observable(phi, n_qubits, axes, qubits, weights)

    for g in range(kinds.shape[0] - 1, -1, -1):
        kind = kinds[g]
        if kind == KIND_CZ:
            _apply_cz(phi, n_qubits, q0[g], q1[g])
            _apply_cz(lam, n_qubits, q0[g], q1[g])
            continue

        d = _generator_overlap(lam, phi, n_qubits, kind, q0[g])
        if slot_kind[g] == SLOT_TRAINABLE:
            g_theta[slot_index[g]] += d
        else:
            g_x[slot_index[g]] += d

        angle = _angle(slot_kind[g], slot_index[g], theta, x)
        _apply_rotation(phi, n_qubits, kind, q0[g], -angle)
        _apply_rotation(lam, n_qubits, kind, q0[g], -angle)


@njit(parallel=True, cache=False, fastmath=FASTMATH)
def _batch_expectations(n_qubits: int, kinds: np.ndarray, q0: np.ndarray, q1: np.ndarray,
                        slot_kind: np.ndarray, slot_index: np.ndarray,
                        phis: np.ndarray, enc: np.ndarray,
                        axes: np.ndarray, qubits: np.ndarray) -> np.ndarray:
    # phis: (n_qc, n_trainable); enc: (B, n_qc, n_encoding) -> (B, n_qc, K)
    n_samples = enc.shape[0]
    n_qc = enc.shape[1]
    n_obs = axes.shape[0]
    out = np.empty((n_samples, n_qc, n_obs), dtype=np.float64)

    for job in prange(n_samples * n_qc):
        i = job // n_qc
        p = job % n_qc
        state = _run_program(n_qubits, kinds, q0, q1, slot_kind, slot_index, phis[p], enc[i, p])
        for k in range(n_obs):
            out[i, p, k] = _expectation(state, n_qubits, axes[k], qubits[k])
    return out


@njit(parallel=True, cache=False, fastmath=FASTMATH)
def _batch_gradients(n_qubits: int, kinds: np.ndarray, q0: np.ndarray, q1: np.ndarray,
                     slot_kind: np.ndarray, slot_index: np.ndarray,
                     phis: np.ndarray, enc: np.ndarray,
                     axes: np.ndarray, qubits: np.ndarray, weights: np.ndarray,
                     n_chunks: int):
    # weights: (B, n_qc, K). Returns per-chunk trainable gradients
    # (n_qc, n_chunks, n_trainable) and per-sample encoding gradients
    # (B, n_qc, n_encoding). Chunk c of patch p covers a fixed sample range.
    n_samples = enc.shape[0]
    n_qc = enc.shape[1]
    n_enc = enc.shape[2]
    n_tr = phis.shape[1]
    g_phi = np.zeros((n_qc, n_chunks, n_tr), dtype=np.float64)
    g_enc = np.zeros((n_samples, n_qc, n_enc), dtype=np.float64)
    chunk = (n_samples + n_chunks - 1) // n_chunks

    for job in prange(n_qc * n_chunks):
        p = job // n_chunks
        c = job % n_chunks
        lo = c * chunk
        hi = min(n_samples, lo + chunk)
        for i in range(lo, hi):
            _adjoint_gradient(n_qubits, kinds, q0, q1, slot_kind, slot_index,
                              phis[p], enc[i, p], axes, qubits, weights[i, p],
                              g_phi[p, c], g_enc[i, p])
    return g_phi, g_enc
