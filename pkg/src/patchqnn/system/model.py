r"""
patchqnn.system.model
=====================

Distributed patch QNN classifier.

Every image :math:`x_i` is cut into :math:`n_{qc}` patches; patch :math:`p`
(bias applied) is bound to the encoding slots of its own QNN with
trainable angles :math:`\Phi_p`, giving an expectation vector
:math:`y_{i,p}\in[-1,1]^{n_{class}}`. The classifier output is

.. math::

    \bar y_i = \frac{1}{n_{qc}}\sum_p y_{i,p}, \qquad
    \mathrm{probs}_i = \mathrm{softmax}(c\,\bar y_i),

trained with the mean cross-entropy. The softmax and its logarithm are
evaluated with :pyfunc:`scipy.special.softmax` and
:pyfunc:`scipy.special.log_softmax`, which subtract the maximum logit and
stay finite at :math:`c=100`.

Gradients are exact: the simulator's adjoint sweep returns derivatives
with respect to both trainable and encoding angles, and the encoding-angle
derivatives are scattered back to the bias grid through the
slot -> feature -> pixel wiring.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import log_softmax, softmax

from patchqnn.algorithms.simulator.base import Observable
from patchqnn.algorithms.simulator.statevector import (batch_expectations,
                                                       batch_gradients)
from patchqnn.algorithms.utils.config import EVAL_BLOCK
from patchqnn.system.ansatz import CircuitTemplate, build_qnn_template
from patchqnn.system.data import (PatchConfig, PreparedDataset,
                                  extract_patches_batch)
from patchqnn.utils.constants import Constants

Batch = Union[PreparedDataset, Tuple[np.ndarray, np.ndarray]]


def default_observables() -> Tuple[Observable, ...]:
    """:math:`X_0..X_4, Z_0..Z_4`."""
    return tuple(Observable(axis, q) for axis, q in Constants.OBSERVABLES)


@dataclass
class ModelParams:
    """
    Trainable parameters: per-patch angle vectors and the positional bias.

    Parameters
    ----------
    phis : numpy.ndarray, shape (n_qc, n_trainable)
        Row :math:`p` is :math:`\\Phi_p`.
    bias : numpy.ndarray, shape (M, M)
        Bias grid :math:`b'`.
    """
    phis: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.phis = np.ascontiguousarray(self.phis, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if self.phis.ndim != 2:
            raise ValueError(f"phis must be (n_qc, n_trainable), got shape {self.phis.shape}")
        if self.bias.ndim != 2 or self.bias.shape[0] != self.bias.shape[1]:
            raise ValueError(f"bias must be square, got shape {self.bias.shape}")
        if not (np.all(np.isfinite(self.phis)) and np.all(np.isfinite(self.bias))):
            raise ValueError("Model parameters must be finite")

    @property
    def n_qc(self) -> int:
        return int(self.phis.shape[0])

    @property
    def n_angles(self) -> int:
        return int(self.phis.size)

    @property
    def size(self) -> int:
        return int(self.phis.size + self.bias.size)

    def angles(self) -> np.ndarray:
        """Trajectory snapshot :math:`(\\Phi_0^T, ..., \\Phi_{n_{qc}-1}^T)^T`."""
        return self.phis.ravel().copy()

    def flatten(self) -> np.ndarray:
        """Angles followed by the row-major bias grid."""
        return np.concatenate([self.phis.ravel(), self.bias.ravel()])

    def with_flat(self, vec: np.ndarray) -> "ModelParams":
        """Parameters of the same shapes filled from :pymeth:`flatten` layout."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.size,):
            raise ValueError(f"Flat vector has shape {vec.shape}, expected ({self.size},)")
        return ModelParams(vec[:self.n_angles].reshape(self.phis.shape),
                           vec[self.n_angles:].reshape(self.bias.shape))

    def with_angles(self, angles: np.ndarray) -> "ModelParams":
        """Replace the angles, keeping the bias grid."""
        angles = np.asarray(angles, dtype=np.float64)
        if angles.shape != (self.n_angles,):
            raise ValueError(f"Angle vector has shape {angles.shape}, expected ({self.n_angles},)")
        return ModelParams(angles.reshape(self.phis.shape), self.bias.copy())

    def copy(self) -> "ModelParams":
        return ModelParams(self.phis.copy(), self.bias.copy())


@dataclass(frozen=True)
class ModelConfig:
    r"""
    Static description of the classifier.

    Parameters
    ----------
    template : CircuitTemplate
        Circuit shared by all patches.
    patch_cfg : PatchConfig
        Patch geometry.
    observables : tuple[Observable, ...]
        Readout observables, one per class.
    n_class : int, default 10
    c : float, default 100
        Softmax scale.
    feature_map : {"strict", "cyclic"}, default "strict"
        ``strict`` binds encoding slot :math:`f` to patch feature :math:`f`
        and requires ``n_encoding == P**2``. ``cyclic`` binds slot :math:`f`
        to feature :math:`f \bmod P^2` and requires ``n_encoding`` to be a
        multiple of :math:`P^2`.

    Raises
    ------
    ValueError
        On any inconsistency between the pieces.
    """
    template: CircuitTemplate
    patch_cfg: PatchConfig
    observables: Tuple[Observable, ...] = field(default_factory=default_observables)
    n_class: int = Constants.N_CLASS
    c: float = Constants.SOFTMAX_SCALE
    feature_map: Literal["strict", "cyclic"] = "strict"

    def __post_init__(self):
        object.__setattr__(self, "observables", tuple(self.observables))
        if self.n_class < 2:
            raise ValueError(f"n_class must be >= 2, got {self.n_class}")
        if len(self.observables) != self.n_class:
            raise ValueError(
                f"Need one observable per class: {len(self.observables)} observables, "
                f"n_class={self.n_class}"
            )
        for obs in self.observables:
            if obs.qubit >= self.template.n_qubits:
                raise ValueError(
                    f"Observable {obs} acts outside the {self.template.n_qubits}-qubit template"
                )
        if not np.isfinite(self.c) or self.c <= 0:
            raise ValueError(f"Softmax scale c must be positive and finite, got {self.c}")

        n_feat = self.patch_cfg.n_features
        n_enc = self.template.n_encoding
        if self.feature_map == "strict":
            if n_enc != n_feat:
                raise ValueError(
                    f"Template has {n_enc} encoding slots but patches have P^2={n_feat} features"
                )
        elif self.feature_map == "cyclic":
            if n_enc == 0 or n_enc % n_feat != 0:
                raise ValueError(
                    f"Cyclic feature map needs n_encoding ({n_enc}) to be a positive multiple "
                    f"of P^2={n_feat}"
                )
        else:
            raise ValueError(f"feature_map must be 'strict' or 'cyclic', got {self.feature_map!r}")

    @property
    def n_qc(self) -> int:
        return self.patch_cfg.n_qc

    @property
    def feature_index(self) -> np.ndarray:
        """Patch feature bound to each encoding slot, shape (n_encoding,)."""
        return np.arange(self.template.n_encoding) % self.patch_cfg.n_features

    @property
    def slot_pixels(self) -> np.ndarray:
        """Flat image pixel feeding encoding slot ``f`` of patch ``p``, shape (n_qc, n_encoding)."""
        return self.patch_cfg.pixel_index()[:, self.feature_index]

    def n_parameters(self, include_bias: bool = True) -> int:
        n = self.n_qc * self.template.n_trainable
        return n + self.patch_cfg.M ** 2 if include_bias else n

    def check_params(self, params: ModelParams) -> None:
        expected = (self.n_qc, self.template.n_trainable)
        if params.phis.shape != expected:
            raise ValueError(f"phis shape {params.phis.shape} does not match {expected}")
        if params.bias.shape != (self.patch_cfg.M, self.patch_cfg.M):
            raise ValueError(
                f"bias shape {params.bias.shape} does not match M={self.patch_cfg.M}"
            )


@dataclass(frozen=True)
class Prediction:
    """Averaged expectation vector and class probabilities of one image."""
    y_bar: np.ndarray
    probs: np.ndarray

    @property
    def label(self) -> int:
        return int(np.argmax(self.probs))


def _unpack(batch: Batch) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, PreparedDataset):
        images, labels = batch.images, batch.labels
    else:
        images, labels = batch
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if images.ndim == 2:
        images = images[None]
    if images.shape[0] == 0:
        raise ValueError("Batch is empty")
    if images.shape[0] != labels.shape[0]:
        raise ValueError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return images, labels


def _check_labels(labels: np.ndarray, cfg: ModelConfig) -> None:
    if labels.min() < 0 or labels.max() >= cfg.n_class:
        raise ValueError(f"Labels must lie in [0, {cfg.n_class - 1}]")


def encode(params: ModelParams, images: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Encoding angles of every (image, patch) circuit, shape (B, n_qc, n_encoding)."""
    cfg.check_params(params)
    patches = extract_patches_batch(images, params.bias, cfg.patch_cfg)
    return np.ascontiguousarray(patches[:, :, cfg.feature_index])


def forward_batch(params: ModelParams, images: np.ndarray, cfg: ModelConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Averaged expectations and probabilities of a stack of images.

    Returns
    -------
    y_bar : numpy.ndarray, shape (B, n_class)
    probs : numpy.ndarray, shape (B, n_class)
    """
    images = np.asarray(images, dtype=np.float64)
    enc = encode(params, images, cfg)
    y = batch_expectations(cfg.template, params.phis, enc, cfg.observables)
    y_bar = y.mean(axis=1)
    return y_bar, softmax(cfg.c * y_bar, axis=1)


def forward(params: ModelParams, image: np.ndarray, cfg: ModelConfig) -> Prediction:
    """
    Prediction for a single ``(M, M)`` image.

    Raises
    ------
    ValueError
        On shape mismatch between *image*, *params* and *cfg*.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (cfg.patch_cfg.M, cfg.patch_cfg.M):
        raise ValueError(f"Image shape {image.shape} does not match M={cfg.patch_cfg.M}")
    y_bar, probs = forward_batch(params, image[None], cfg)
    return Prediction(y_bar[0], probs[0])


def _nll(y_bar: np.ndarray, labels: np.ndarray, c: float) -> np.ndarray:
    logp = log_softmax(c * y_bar, axis=1)
    return -logp[np.arange(labels.shape[0]), labels]


def loss(params: ModelParams, batch: Batch, cfg: ModelConfig) -> float:
    """Mean cross-entropy of *batch* (``(images, labels)`` or a dataset)."""
    images, labels = _unpack(batch)
    _check_labels(labels, cfg)
    y_bar, _ = forward_batch(params, images, cfg)
    return float(np.mean(_nll(y_bar, labels, cfg.c)))


def loss_and_gradient(params: ModelParams, batch: Batch, cfg: ModelConfig,
                      ) -> Tuple[float, np.ndarray, ModelParams]:
    r"""
    Loss, probabilities and exact gradient in one pass.

    The observable weights passed to the adjoint sweep are

    .. math::

        w_{ipk} = \frac{c\,(\mathrm{probs}_{ik} - [k = \ell_i])}{n_{qc}\,B}.

    Returns
    -------
    loss : float
        Mean cross-entropy.
    probs : numpy.ndarray, shape (B, n_class)
    grad : ModelParams
        Gradient with respect to ``phis`` and ``bias``.
    """
    images, labels = _unpack(batch)
    _check_labels(labels, cfg)
    enc = encode(params, images, cfg)
    y = batch_expectations(cfg.template, params.phis, enc, cfg.observables)
    y_bar = y.mean(axis=1)
    probs = softmax(cfg.c * y_bar, axis=1)
    value = float(np.mean(_nll(y_bar, labels, cfg.c)))

    n_samples = labels.shape[0]
    delta = probs.copy()
    delta[np.arange(n_samples), labels] -= 1.0
    scale = cfg.c / (cfg.n_qc * n_samples)
    weights = np.repeat((scale * delta)[:, None, :], cfg.n_qc, axis=1)

    g_phis, g_enc = batch_gradients(cfg.template, params.phis, enc, weights, cfg.observables)
    per_slot = g_enc.sum(axis=0)  # (n_qc, n_encoding)
    M = cfg.patch_cfg.M
    g_bias = np.bincount(cfg.slot_pixels.ravel(), weights=per_slot.ravel(), minlength=M * M)
    return value, probs, ModelParams(g_phis, g_bias.reshape(M, M))


def gradient(params: ModelParams, batch: Batch, cfg: ModelConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of :pyfunc:`loss`: ``(d_phis, d_bias)``."""
    _, _, grad = loss_and_gradient(params, batch, cfg)
    return grad.phis, grad.bias


def evaluate(params: ModelParams, dataset: Batch, cfg: ModelConfig,
             block: int = EVAL_BLOCK) -> Tuple[float, float]:
    """
    Mean loss and accuracy over *dataset*, processed in blocks of *block* images.

    Ties in ``argmax(probs)`` resolve to the lowest class index.

    Raises
    ------
    ValueError
        If the dataset is empty.
    """
    images, labels = _unpack(dataset)
    _check_labels(labels, cfg)
    nll = np.empty(labels.shape[0])
    correct = np.empty(labels.shape[0], dtype=bool)
    for lo in range(0, labels.shape[0], block):
        hi = lo + block
        y_bar, probs = forward_batch(params, images[lo:hi], cfg)
        nll[lo:hi] = _nll(y_bar, labels[lo:hi], cfg.c)
        correct[lo:hi] = np.argmax(probs, axis=1) == labels[lo:hi]
    return float(np.mean(nll)), float(np.mean(correct))


def build_model_config(n_qubits: int, depth: int, patch_cfg: PatchConfig,
                       observables: Optional[Sequence[Observable]] = None, **kwargs) -> ModelConfig:
    """Model configuration around a freshly built QNN template."""
    cz_per_seq = kwargs.pop("encoding_cz_per_sequence", False)
    template = build_qnn_template(n_qubits, depth, encoding_cz_per_sequence=cz_per_seq)
    if observables is None:
        observables = default_observables()
    return ModelConfig(template, patch_cfg, tuple(observables), **kwargs)


def flat_objective(params: ModelParams, batch: Batch, cfg: ModelConfig,
                   scope: Literal["angles_and_bias", "angles_only"] = "angles_and_bias",
                   ) -> Tuple[np.ndarray, Callable[[np.ndarray], float], Callable[[np.ndarray], np.ndarray]]:
    """
    Loss and gradient of *batch* as functions of a flat parameter vector.

    With ``scope="angles_only"`` the vector holds the angles and the bias
    grid stays at ``params.bias``; otherwise it is :pymeth:`ModelParams.flatten`.

    Returns
    -------
    theta : numpy.ndarray
        Flat parameters of *params* in the chosen scope.
    loss_fn, grad_fn : callable
    """
    images, labels = _unpack(batch)
    if scope == "angles_only":
        theta = params.angles()
        rebuild = params.with_angles

        def pick(grad: ModelParams) -> np.ndarray:
            return grad.phis.ravel().copy()
    elif scope == "angles_and_bias":
        theta = params.flatten()
        rebuild = params.with_flat

        def pick(grad: ModelParams) -> np.ndarray:
            return grad.flatten()
    else:
        raise ValueError(f"Unknown parameter scope {scope!r}")

    def loss_fn(vec: np.ndarray) -> float:
        return evaluate(rebuild(vec), (images, labels), cfg)[0]

    def grad_fn(vec: np.ndarray) -> np.ndarray:
        return pick(loss_and_gradient(rebuild(vec), (images, labels), cfg)[2])

    return theta, loss_fn, grad_fn


def angles_loss_fn(params: ModelParams, dataset: Batch, cfg: ModelConfig) -> Callable[[np.ndarray], float]:
    """Loss over *dataset* as a function of the angles, bias fixed at ``params.bias``."""
    _, loss_fn, _ = flat_objective(params, dataset, cfg, scope="angles_only")
    return loss_fn
