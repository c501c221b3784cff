"""Mini-batch training loop with early stopping on validation loss."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidInput, NumericalError
from .model import Sequential
from .optim import Adam

__all__ = ["TrainConfig", "History", "EarlyStopping", "stratified_holdout", "train"]

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 50
    early_stop_patience: int = 10
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise InvalidInput("val_fraction must lie strictly between 0 and 1")
        if self.batch_size < 1 or self.max_epochs < 1 or self.early_stop_patience < 1:
            raise InvalidInput("batch_size, max_epochs and early_stop_patience must be positive")
        if not self.learning_rate > 0:
            raise InvalidInput("learning_rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    epoch_time: list[float] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    @property
    def mean_epoch_time(self) -> float:
        return float(np.mean(self.epoch_time)) if self.epoch_time else float("nan")


class EarlyStopping:
    """Stop once the monitored loss has not improved for ``patience`` updates."""

    def __init__(self, patience: int = 10):
        self.patience = patience
        self.best = math.inf
        self.wait = 0

    def update(self, loss: float) -> bool:
        if loss < self.best:
            self.best = loss
            self.wait = 0
        else:
            self.wait += 1
        return self.wait >= self.patience


def stratified_holdout(labels: np.ndarray, strata: np.ndarray | None, fraction: float, rng: np.random.Generator):
    """Split indices into (keep, holdout), stratified by (label, stratum).

    Each group contributes round(fraction * size) examples to the holdout.
    """
    labels = np.asarray(labels)
    strata = np.zeros(len(labels)) if strata is None else np.asarray(strata)
    keep, hold = [], []
    groups: dict[tuple, list[int]] = {}
    for i, key in enumerate(zip(labels.tolist(), strata.tolist())):
        groups.setdefault(key, []).append(i)
    for key in sorted(groups):
        idx = np.array(groups[key])
        rng.shuffle(idx)
        k = int(math.floor(fraction * len(idx) + 0.5))
        hold.extend(idx[:k].tolist())
        keep.extend(idx[k:].tolist())
    return np.array(sorted(keep), dtype=np.int64), np.array(sorted(hold), dtype=np.int64)


def train(
    model: Sequential,
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig | None = None,
    strata: np.ndarray | None = None,
) -> tuple[Sequential, History]:
    """Train ``model`` in place with Adam and early stopping.

    A stratified ``val_fraction`` of (x, y) is held out for the monitored
    validation loss; if the holdout comes out empty the training loss is
    monitored instead.  The weights of the last epoch are kept.
    """
    cfg = cfg or TrainConfig()
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise InvalidInput("training needs at least two classes")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    tr_idx, val_idx = stratified_holdout(y, strata, cfg.val_fraction, rng)
    xt, yt = x[tr_idx], y[tr_idx]
    xv, yv = x[val_idx], y[val_idx]

    opt = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    params = model.param_dict()
    stopper = EarlyStopping(cfg.early_stop_patience)
    hist = History()
    for epoch in range(cfg.max_epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(yt))
        loss_sum = 0.0
        correct = 0
        for s in range(0, len(order), cfg.batch_size):
            b = order[s : s + cfg.batch_size]
            model.zero_grads()
            try:
                loss, ok = model.accumulate_gradients(xt[b], yt[b])
            except NumericalError as e:
                raise NumericalError(f"{e} in epoch {epoch}", epoch=epoch) from e
            if not math.isfinite(loss):
                raise NumericalError(f"loss became {loss} in epoch {epoch}", epoch=epoch)
            opt.step(params, model.grad_dict())
            loss_sum += loss * len(b)
            correct += ok
        hist.epoch_time.append(time.perf_counter() - t0)
        hist.train_loss.append(loss_sum / len(yt))
        hist.train_acc.append(correct / len(yt))
        if len(yv):
            vl, va = model.evaluate(xv, yv)
        else:
            vl, va = hist.train_loss[-1], hist.train_acc[-1]
        if not math.isfinite(vl):
            raise NumericalError(f"validation loss became {vl} in epoch {epoch}", epoch=epoch)
        hist.val_loss.append(vl)
        hist.val_acc.append(va)
        log.debug("epoch %d loss %.4f acc %.3f val %.4f/%.3f", epoch, hist.train_loss[-1], hist.train_acc[-1], vl, va)
        if stopper.update(vl):
            hist.stopped_early = True
            break
    return model, hist
