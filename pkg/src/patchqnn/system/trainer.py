r"""
patchqnn.system.trainer
=======================

Mini-batch training of the patch QNN classifier.

One run:

* initialises :math:`\Phi_p \sim U[0,\pi]` from a seeded generator and the
  bias grid at zero;
* for every epoch shuffles the training set with a second generator
  spawned from the same seed, takes one Adam step per mini-batch at the
  epoch's cosine-annealed rate, then evaluates the full training loss and
  the test loss/accuracy;
* records the angle snapshot :math:`q^{(i)}` after every epoch (biases are
  not part of the snapshot) and keeps the parameters of the epoch with the
  smallest training loss.

Identical configurations give bit-identical logs whatever the thread
count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from patchqnn.algorithms.optim.adam import AdamState, adam_step
from patchqnn.algorithms.optim.schedule import LrSchedule, lr_at
from patchqnn.system.ansatz import CircuitTemplate
from patchqnn.system.data import PreparedDataset, zero_bias
from patchqnn.system.model import (ModelConfig, ModelParams, evaluate,
                                   loss_and_gradient)
from patchqnn.utils.constants import Constants
from patchqnn.utils.exceptions import NumericalError
from patchqnn.utils.log_config import logger

METRIC_COLUMNS = ["epoch", "lr", "train_loss", "test_loss", "test_acc"]


@dataclass(frozen=True)
class TrainConfig:
    """
    Training protocol.

    Parameters
    ----------
    model : ModelConfig
        Classifier being trained.
    epochs : int, default 50
    batch_size : int, default 1000
    seed : int, default 0
        Seeds both the initial angles and the shuffling.
    schedule : LrSchedule or float or None
        Learning-rate schedule. A float is a constant rate; *None* selects
        cosine annealing from the tabulated rate for the template depth.
    train_eval_subset : int or None
        Evaluate the epoch-end training loss on the first this many training
        samples instead of the full set.
    show_progress : bool, default True
        Display a :pydata:`tqdm` bar over the batches of each epoch.
    """
    model: ModelConfig
    epochs: int = Constants.EPOCHS
    batch_size: int = Constants.BATCH_SIZE
    seed: int = 0
    schedule: Union[LrSchedule, float, None] = None
    train_eval_subset: Optional[int] = None
    show_progress: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.train_eval_subset is not None and self.train_eval_subset < 1:
            raise ValueError(f"train_eval_subset must be >= 1, got {self.train_eval_subset}")
        if self.schedule is None:
            lr = Constants.get_learning_rate(self.model.template.depth)
            object.__setattr__(self, "schedule", LrSchedule(lr, epochs=self.epochs))
        elif not isinstance(self.schedule, LrSchedule) and self.schedule < 0:
            raise ValueError(f"Constant learning rate must be >= 0, got {self.schedule}")

    def lr_for(self, epoch: int) -> float:
        if isinstance(self.schedule, LrSchedule):
            return lr_at(self.schedule, epoch)
        return float(self.schedule)


@dataclass
class TrajectoryLog:
    """
    Everything recorded during one training run.

    ``q_epoch[i]``, ``train_loss[i]``, ``test_loss[i]``, ``test_acc[i]`` and
    ``lr[i]`` refer to the state at the end of epoch ``i`` (0-based).
    """
    q_init: np.ndarray
    init_params: ModelParams
    init_train_loss: float
    init_test_loss: float
    init_test_acc: float
    q_epoch: List[np.ndarray] = field(default_factory=list)
    train_loss: List[float] = field(default_factory=list)
    test_loss: List[float] = field(default_factory=list)
    test_acc: List[float] = field(default_factory=list)
    lr: List[float] = field(default_factory=list)
    min_loss_epoch: int = -1
    min_loss_params: Optional[ModelParams] = None
    final_params: Optional[ModelParams] = None

    @property
    def n_epochs(self) -> int:
        return len(self.q_epoch)

    @property
    def Q(self) -> np.ndarray:
        """Snapshot matrix, rows ``q_init, q_epoch[0], ..., q_epoch[E-1]``."""
        return np.vstack([self.q_init] + list(self.q_epoch))

    def record(self, epoch_lr: float, params: ModelParams, train_loss: float,
               test_loss: float, test_acc: float) -> bool:
        """Append one epoch; returns True when it is the new minimum."""
        self.q_epoch.append(params.angles())
        self.train_loss.append(train_loss)
        self.test_loss.append(test_loss)
        self.test_acc.append(test_acc)
        self.lr.append(epoch_lr)
        is_min = self.min_loss_epoch < 0 or train_loss < self.train_loss[self.min_loss_epoch]
        if is_min:
            self.min_loss_epoch = len(self.train_loss) - 1
            self.min_loss_params = params.copy()
        return is_min

    def metrics_frame(self) -> pd.DataFrame:
        """Per-epoch metrics with columns ``epoch, lr, train_loss, test_loss, test_acc``."""
        return pd.DataFrame({
            "epoch": np.arange(self.n_epochs),
            "lr": self.lr,
            "train_loss": self.train_loss,
            "test_loss": self.test_loss,
            "test_acc": self.test_acc,
        }, columns=METRIC_COLUMNS)

    def summary(self) -> dict:
        e = self.min_loss_epoch
        return {
            "epochs": self.n_epochs,
            "min_loss_epoch": e,
            "min_train_loss": self.train_loss[e],
            "test_loss": self.test_loss[e],
            "test_acc": self.test_acc[e],
            "initial_train_loss": self.init_train_loss,
            "initial_test_loss": self.init_test_loss,
            "initial_test_acc": self.init_test_acc,
            "final_train_loss": self.train_loss[-1],
        }


def init_params(seed: int, n_qc: int, template: CircuitTemplate, M: int) -> ModelParams:
    r"""
    Seeded initial parameters: :math:`\Phi \sim U[0, \pi]`, :math:`b' = 0`.

    Parameters
    ----------
    seed : int
        Generator seed.
    n_qc : int
        Number of patch QNNs.
    template : CircuitTemplate
        Circuit supplying the per-QNN trainable count.
    M : int
        Image side.
    """
    lo, hi = Constants.INIT_ANGLE_RANGE
    rng = np.random.default_rng(seed)
    phis = rng.uniform(lo, hi, size=(n_qc, template.n_trainable))
    return ModelParams(phis, zero_bias(M))


def _shuffle_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])


CheckpointHook = Callable[[str, ModelParams, int], None]


def train(cfg: TrainConfig, train_set: PreparedDataset, test_set: PreparedDataset,
          on_checkpoint: Optional[CheckpointHook] = None) -> TrajectoryLog:
    """
    Run the training protocol.

    Parameters
    ----------
    cfg : TrainConfig
        Protocol and model.
    train_set, test_set : PreparedDataset
        Preprocessed data.
    on_checkpoint : callable, optional
        Called as ``on_checkpoint(tag, params, epoch)`` with tag ``"init"``
        (epoch -1), ``"min_loss"`` whenever a new minimum is reached and
        ``"final"``.

    Returns
    -------
    TrajectoryLog

    Raises
    ------
    NumericalError
        If a batch produces a non-finite loss or gradient; the message names
        the epoch and batch index.
    """
    if len(train_set) == 0 or len(test_set) == 0:
        raise ValueError("Training and test sets must be non-empty")
    model = cfg.model
    params = init_params(cfg.seed, model.n_qc, model.template, model.patch_cfg.M)
    eval_set = train_set.head(cfg.train_eval_subset)
    rng = _shuffle_rng(cfg.seed)

    train0, _ = evaluate(params, eval_set, model)
    test0, acc0 = evaluate(params, test_set, model)
    log = TrajectoryLog(params.angles(), params.copy(), train0, test0, acc0)
    logger.info(
        f"Training {model.n_qc} QNNs x {model.template.n_trainable} angles "
        f"({model.n_parameters()} parameters incl. bias) on {len(train_set)} samples; "
        f"initial train loss {train0:.6f}, test loss {test0:.6f}, test acc {acc0:.4f}"
    )
    if on_checkpoint is not None:
        on_checkpoint("init", params, -1)

    state = AdamState.zeros(params.size)
    n = len(train_set)
    n_batches = (n + cfg.batch_size - 1) // cfg.batch_size

    for epoch in range(cfg.epochs):
        lr = cfg.lr_for(epoch)
        order = rng.permutation(n)
        batches = tqdm(range(n_batches), desc=f"Epoch {epoch + 1}/{cfg.epochs}",
                       disable=not cfg.show_progress, leave=False)
        for b in batches:
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            value, _, grad = loss_and_gradient(
                params, (train_set.images[idx], train_set.labels[idx]), model
            )
            flat_grad = grad.flatten()
            if not (np.isfinite(value) and np.all(np.isfinite(flat_grad))):
                raise NumericalError(
                    f"Non-finite loss or gradient at epoch {epoch}, batch {b} (loss={value})"
                )
            flat, state = adam_step(state, params.flatten(), flat_grad, lr)
            params = params.with_flat(flat)
            logger.debug(f"epoch {epoch} batch {b}: loss {value:.6f}")

        train_loss, _ = evaluate(params, eval_set, model)
        test_loss, test_acc = evaluate(params, test_set, model)
        is_min = log.record(lr, params, train_loss, test_loss, test_acc)
        logger.info(
            f"Epoch {epoch + 1}/{cfg.epochs} lr={lr:.3e} train_loss={train_loss:.6f} "
            f"test_loss={test_loss:.6f} test_acc={test_acc:.4f}" + (" *" if is_min else "")
        )
        if is_min and on_checkpoint is not None:
            on_checkpoint("min_loss", params, epoch)

    log.final_params = params.copy()
    if on_checkpoint is not None:
        on_checkpoint("final", params, cfg.epochs - 1)
    return log
