"""
Brute-force reference implementations for the test suites.

Dense Kronecker-product circuit simulation, central finite differences and
dense eigendecompositions. Slow by construction; never imported by the
library.
"""

from typing import Callable

import numpy as np
from scipy.linalg import eigh

DENSE_MAX_QUBITS = 6
DENSE_MAX_DIM = 100

_I2 = np.eye(2, dtype=np.complex128)


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def single_qubit_unitary(n: int, qubit: int, g: np.ndarray) -> np.ndarray:
    """``g`` on *qubit* of an *n*-qubit little-endian register."""
    U = np.ones((1, 1), dtype=np.complex128)
    for k in reversed(range(n)):
        U = np.kron(U, g if k == qubit else _I2)
    return U


def cz_unitary(n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(1 << n)
    both = ((idx >> a) & 1) & ((idx >> b) & 1)
    return np.diag(np.where(both == 1, -1.0, 1.0).astype(np.complex128))


def circuit_unitary(template, trainable_angles, encoding_angles) -> np.ndarray:
    n = template.n_qubits
    if n > DENSE_MAX_QUBITS:
        raise ValueError(f"Dense oracle limited to {DENSE_MAX_QUBITS} qubits, got {n}")
    theta = np.asarray(trainable_angles, dtype=np.float64).ravel()
    x = np.asarray(encoding_angles, dtype=np.float64).ravel()
    U = np.eye(1 << n, dtype=np.complex128)
    for gate in template.gates:
        if gate.kind == "CZ":
            G = cz_unitary(n, *gate.targets)
        else:
            angle = theta[gate.slot.index] if gate.slot.kind == "trainable" else x[gate.slot.index]
            g = _ry(angle) if gate.kind == "RY" else _rx(angle)
            G = single_qubit_unitary(n, gate.targets[0], g)
        U = G @ U
    return U


def simulate_dense(template, trainable_angles, encoding_angles) -> np.ndarray:
    """Amplitudes of ``U |0...0>`` from the full circuit unitary."""
    U = circuit_unitary(template, trainable_angles, encoding_angles)
    return U[:, 0].copy()


def pauli_expectation(amplitudes: np.ndarray, n: int, axis: str, qubit: int) -> float:
    pauli = np.array([[0, 1], [1, 0]] if axis == "X" else [[1, 0], [0, -1]], dtype=np.complex128)
    O = single_qubit_unitary(n, qubit, pauli)
    return float(np.vdot(amplitudes, O @ amplitudes).real)


def fd_gradient(f: Callable[[np.ndarray], float], params: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central differences of *f* in every coordinate."""
    if step <= 0:
        raise ValueError("step must be positive")
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros(params.size)
    for j in range(params.size):
        e = np.zeros(params.size)
        e[j] = step
        grad[j] = (f(params + e) - f(params - e)) / (2 * step)
    return grad


def dense_hessian_eigs(f: Callable[[np.ndarray], float], params: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Eigenvalues, descending, of the symmetrised finite-difference Hessian of *f*."""
    params = np.asarray(params, dtype=np.float64)
    dim = params.size
    if dim > DENSE_MAX_DIM:
        raise ValueError(f"Dense Hessian limited to {DENSE_MAX_DIM} parameters, got {dim}")
    H = np.zeros((dim, dim))
    f0 = f(params)
    for i in range(dim):
        ei = np.zeros(dim)
        ei[i] = step
        H[i, i] = (f(params + ei) - 2 * f0 + f(params - ei)) / step**2
        for j in range(i + 1, dim):
            ej = np.zeros(dim)
            ej[j] = step
            H[i, j] = (f(params + ei + ej) - f(params + ei - ej)
                       - f(params - ei + ej) + f(params - ei - ej)) / (4 * step**2)
            H[j, i] = H[i, j]
    H = 0.5 * (H + H.T)
    return eigh(H, eigvals_only=True)[::-1]


def dense_pca(Q: np.ndarray):
    """Eigenvalues (descending) and eigenvectors of the sample covariance of the rows of *Q*."""
    Q = np.asarray(Q, dtype=np.float64)
    C = np.cov(Q, rowvar=False, ddof=1)
    lam, V = eigh(C)
    return lam[::-1], V[:, ::-1]
