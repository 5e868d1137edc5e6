r"""
patchqnn.algorithms.optim.adam
==============================

Bias-corrected Adam on flat parameter vectors.

The update with step :math:`t \to t+1`, gradient :math:`g` and rate
:math:`\eta` is

.. math::

    m &\leftarrow \beta_1 m + (1-\beta_1) g, \qquad
    v \leftarrow \beta_2 v + (1-\beta_2) g^2, \\
    \theta &\leftarrow \theta - \eta\,
        \frac{m / (1-\beta_1^{t+1})}{\sqrt{v / (1-\beta_2^{t+1})} + \epsilon}.

The step is a pure function: it returns a new state and a new parameter
vector, so optimising a concatenation of parameter blocks is identical to
optimising each block with a shared step count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from patchqnn.utils.exceptions import NumericalError


@dataclass(frozen=True)
class AdamState:
    """
    Moments and step count of one Adam run.

    Parameters
    ----------
    m, v : numpy.ndarray
        First and second moment estimates, same shape as the parameters.
    t : int
        Number of completed steps.
    beta1, beta2, eps : float
        Decay rates and denominator offset.
    """
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.m.shape != self.v.shape:
            raise ValueError(f"Moment shapes differ: m {self.m.shape}, v {self.v.shape}")
        if self.t < 0:
            raise ValueError(f"Step count must be >= 0, got {self.t}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError(f"Betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if np.any(self.v < 0):
            raise ValueError("Second moment estimate has negative entries")

    @classmethod
    def zeros(cls, size: int, **kwargs) -> "AdamState":
        """Fresh state for *size* parameters."""
        return cls(np.zeros(size), np.zeros(size), **kwargs)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray,
              lr: float) -> Tuple[np.ndarray, AdamState]:
    """
    One Adam update.

    Parameters
    ----------
    state : AdamState
        Current moments.
    params, grads : numpy.ndarray
        Flat parameters and their gradient.
    lr : float
        Learning rate, ``>= 0``.

    Returns
    -------
    params : numpy.ndarray
        Updated parameters (new array).
    state : AdamState
        Updated moments with ``t`` incremented.

    Raises
    ------
    ValueError
        On shape mismatch or negative learning rate.
    NumericalError
        If *grads* has non-finite entries.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError(
            f"Shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    if lr < 0:
        raise ValueError(f"Learning rate must be >= 0, got {lr}")
    bad = ~np.isfinite(grads)
    if np.any(bad):
        raise NumericalError(
            f"Non-finite gradient at {int(bad.sum())} of {grads.size} entries "
            f"(first at index {int(np.argmax(bad))}) in Adam step {state.t + 1}"
        )

    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(m, v, t, state.beta1, state.beta2, state.eps)
