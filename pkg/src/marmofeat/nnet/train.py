"""Minibatch training loop with plateau scheduling and early stopping."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DivergenceError
from .models import Model, predict_batch
from .optim import AdamState, PlateauScheduler, adam_step

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "val_uar", "lr")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-3
    max_epochs: int = 30
    scheduler_patience: int = 10
    scheduler_factor: float = 0.5
    min_lr: float = 1e-6
    early_stop_patience: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")
        if not (self.learning_rate > 0 and 0 < self.scheduler_factor < 1):
            raise ValueError("learning_rate must be > 0 and scheduler_factor in (0, 1)")


def monitor_uar(preds: np.ndarray, truths: np.ndarray, n_c: int) -> float:
    """UAR in percent over the classes that occur in ``truths``."""
    preds = np.asarray(preds)
    truths = np.asarray(truths)
    recalls = [np.mean(preds[truths == c] == c) for c in range(n_c) if np.any(truths == c)]
    return float(100.0 * np.mean(recalls))


def _take(inputs, idx):
    if isinstance(inputs, np.ndarray):
        return inputs[idx]
    return [inputs[i] for i in idx]


def train(model: Model, train_set, val_set, config: TrainConfig, progress=None) -> Model:
    """Fit ``model`` in place and return it with the best-validation parameters.

    ``train_set`` and ``val_set`` are (inputs, labels) pairs. Inputs are a
    (n, dim) array for vector models or a sequence of 1-D waveforms for the
    CNN. ``progress`` is an optional callable receiving each history row.
    """
    x_tr, y_tr = train_set
    x_va, y_va = val_set
    y_tr = np.asarray(y_tr, dtype=np.int64)
    y_va = np.asarray(y_va, dtype=np.int64)
    if len(y_tr) == 0 or len(y_va) == 0:
        raise ValueError("training and validation sets must be non-empty")
    if len(x_tr) != len(y_tr) or len(x_va) != len(y_va):
        raise ValueError("inputs and labels differ in length")

    rng = np.random.default_rng(config.seed)
    state = AdamState()
    sched = PlateauScheduler(config.learning_rate, config.scheduler_patience,
                             config.scheduler_factor, config.min_lr)
    params = model.named_params()
    best_uar, best_params, since_best = -np.inf, model.copy_params(), 0
    model.history = []

    for epoch in range(1, config.max_epochs + 1):
        lr = sched.lr
        order = rng.permutation(len(y_tr))
        total, seen = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = model.loss_and_gradients(_take(x_tr, idx), y_tr[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}, batch {start // config.batch_size}")
            adam_step(params, grads, state, lr)
            total += loss * len(idx)
            seen += len(idx)

        val_uar = monitor_uar(predict_batch(model, x_va), y_va, model.n_classes)
        row = {"epoch": epoch, "train_loss": total / seen, "val_uar": val_uar, "lr": lr}
        model.history.append(row)
        if progress is not None:
            progress(row)
        log.debug("epoch %d loss %.4f val_uar %.2f lr %.2e", epoch, row["train_loss"], val_uar, lr)

        if val_uar > best_uar:
            best_uar, best_params, since_best = val_uar, model.copy_params(), 0
            model.best_epoch = epoch
        else:
            since_best += 1
        sched.step(val_uar)
        if config.early_stop_patience is not None and since_best >= config.early_stop_patience:
            log.info("early stop at epoch %d (best %d)", epoch, model.best_epoch)
            break

    model.load_params(best_params)
    return model


def write_history(history: list[dict], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for row in history:
            w.writerow([row["epoch"], repr(float(row["train_loss"])),
                        repr(float(row["val_uar"])), repr(float(row["lr"]))])


def read_history(path) -> list[dict]:
    with open(Path(path), newline="") as fh:
        return [{"epoch": int(r["epoch"]), "train_loss": float(r["train_loss"]),
                 "val_uar": float(r["val_uar"]), "lr": float(r["lr"])}
                for r in csv.DictReader(fh)]
