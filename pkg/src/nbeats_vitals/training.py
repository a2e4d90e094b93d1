"""Mini-batch Adam training with early stopping on validation MSE."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .nbeats import NBeatsModel, mse_loss_and_grad
from .tensor_core import AdamState, adam_step, seeded_rng

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 50
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: NBeatsModel
    history: list[dict] = field(default_factory=list)
    best_epoch: int | None = None
    best_valid_loss: float = float("inf")


def stack_windows(windows) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([np.asarray(w.lookback, dtype=np.float64) for w in windows])
    y = np.stack([np.asarray(w.horizon, dtype=np.float64) for w in windows])
    return x, y


def _check_set(name, windows, model):
    if not windows:
        raise TrainingError(f"{name} set is empty")
    for w in windows:
        if len(w.lookback) != model.lookback or len(w.horizon) != model.horizon:
            raise TrainingError(
                f"{name} window for patient {w.patient_id} has shape "
                f"{len(w.lookback)}/{len(w.horizon)}, model expects {model.lookback}/{model.horizon}"
            )


def batch_mse(model: NBeatsModel, x: np.ndarray, y: np.ndarray, batch_size: int = 256) -> float:
    total = 0.0
    for start in range(0, len(x), batch_size):
        d = model.forecast(x[start:start + batch_size]) - y[start:start + batch_size]
        total += float(np.sum(d * d))
    return total / y.size


def train(model: NBeatsModel, train_set, valid_set, config: TrainConfig | None = None) -> TrainResult:
    """Fit ``model`` in place and return it together with the loss history.

    Each history entry holds the epoch number, the sample-weighted mean
    training loss of that epoch and the validation MSE after it. The weights
    of the epoch with the lowest validation MSE are restored at the end.
    """
    cfg = config or TrainConfig()
    _check_set("training", train_set, model)
    _check_set("validation", valid_set, model)
    x_tr, y_tr = stack_windows(train_set)
    x_va, y_va = stack_windows(valid_set)

    rng = seeded_rng(cfg.seed)
    params = model.params()
    state = AdamState.for_params(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    result = TrainResult(model)
    best = [p.copy() for p in params]
    stale = 0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(x_tr))
        seen, running = 0, 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = mse_loss_and_grad(model, x_tr[idx], y_tr[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"loss became {loss} at epoch {epoch}, batch starting {start}")
            adam_step(params, grads, state)
            running += loss * len(idx)
            seen += len(idx)
        valid_loss = batch_mse(model, x_va, y_va)
        if not np.isfinite(valid_loss):
            raise TrainingError(f"validation loss became {valid_loss} at epoch {epoch}")
        result.history.append(
            {"epoch": epoch, "train_loss": running / seen, "valid_loss": valid_loss}
        )
        if valid_loss < result.best_valid_loss:
            result.best_valid_loss = valid_loss
            result.best_epoch = epoch
            best = [p.copy() for p in params]
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("early stop at epoch %d (best %d)", epoch, result.best_epoch)
                break

    if result.best_epoch is not None:
        model.set_params(best)
    return result
