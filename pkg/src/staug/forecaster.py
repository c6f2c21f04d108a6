"""Linear direct multi-horizon forecaster trained by mini-batch SGD.

The model maps the flattened ``(c, d)`` history to the flattened ``(c, h)``
future in one affine step. Flattening is channel-major (row-major over
``(c, steps)``), so ``x[k * d + t]`` is channel ``k`` at history step ``t``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .sampling import ConfigError, RandomSource
from .series import ShapeError, WindowPair, stack_windows

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "staug-linear-forecaster"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged in epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


@dataclass
class LinearForecastModel:
    weights: np.ndarray
    bias: np.ndarray
    c: int
    d: int
    h: int

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.weights.shape != (self.c * self.h, self.c * self.d):
            raise ShapeError(f"weights must be {(self.c * self.h, self.c * self.d)}, got {self.weights.shape}")
        if self.bias.shape != (self.c * self.h,):
            raise ShapeError(f"bias must have length {self.c * self.h}, got {self.bias.shape[0]}")

    @classmethod
    def zeros(cls, c: int, d: int, h: int) -> "LinearForecastModel":
        return cls(np.zeros((c * h, c * d)), np.zeros(c * h), c, d, h)

    def copy(self) -> "LinearForecastModel":
        return LinearForecastModel(self.weights.copy(), self.bias.copy(), self.c, self.d, self.h)

    def predict_batch(self, histories: np.ndarray) -> np.ndarray:
        """``(N, c, d)`` histories to ``(N, c, h)`` forecasts."""
        histories = np.asarray(histories, dtype=np.float64)
        if histories.ndim != 3 or histories.shape[1:] != (self.c, self.d):
            raise ShapeError(f"expected histories of shape (N, {self.c}, {self.d}), got {histories.shape}")
        flat = histories.reshape(histories.shape[0], -1)
        return (flat @ self.weights.T + self.bias).reshape(-1, self.c, self.h)


def predict(model: LinearForecastModel, history: np.ndarray) -> np.ndarray:
    history = np.asarray(history, dtype=np.float64)
    if history.shape != (model.c, model.d):
        raise ShapeError(f"expected history of shape {(model.c, model.d)}, got {history.shape}")
    return model.predict_batch(history[None])[0]


def _check_pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return pred, target


def mse(pred, target) -> float:
    pred, target = _check_pair(pred, target)
    return float(np.mean((pred - target) ** 2))


def mae(pred, target) -> float:
    pred, target = _check_pair(pred, target)
    return float(np.mean(np.abs(pred - target)))


def loss_and_grad(model: LinearForecastModel, histories: np.ndarray, futures: np.ndarray):
    """Per-element mean squared error over a batch and its parameter gradients.

    Returns ``(loss, grad_weights, grad_bias)``.
    """
    n = histories.shape[0]
    x = histories.reshape(n, -1)
    resid = (x @ model.weights.T + model.bias) - futures.reshape(n, -1)
    scale = 2.0 / resid.size
    return float(np.mean(resid**2)), scale * (resid.T @ x), scale * resid.sum(axis=0)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    decay: float = 0.5
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 < self.decay <= 1:
            raise ConfigError(f"decay must be in (0, 1], got {self.decay}")

    def to_dict(self) -> dict:
        return asdict(self)


# augmenter(index, key) -> WindowPair; key is (epoch, position in epoch)
AugmentFn = Callable[[int, tuple], WindowPair]


def train(
    model: LinearForecastModel,
    train_windows: Sequence[WindowPair],
    augmenter: Optional[AugmentFn] = None,
    cfg: TrainConfig = TrainConfig(),
    rng: Optional[RandomSource] = None,
) -> tuple[LinearForecastModel, list[float]]:
    """Fit ``model`` on ``train_windows``; returns a trained copy and per-epoch mean batch loss.

    Every epoch reshuffles the windows; each index in a batch is passed
    through ``augmenter`` (fresh draw every time) before the gradient step.
    """
    if not train_windows:
        raise ConfigError("training set is empty")
    rng = rng if rng is not None else RandomSource(cfg.seed)
    model = model.copy()
    n = len(train_windows)
    raw_h, raw_f = stack_windows(train_windows)
    losses = []
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs):
        order = rng.child(epoch).permutation(n)
        total, count = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if augmenter is None:
                hb, fb = raw_h[idx], raw_f[idx]
            else:
                batch = [augmenter(int(i), (epoch, start + k)) for k, i in enumerate(idx)]
                hb, fb = stack_windows(batch)
            loss, g_w, g_b = loss_and_grad(model, hb, fb)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, loss)
            model.weights -= lr * g_w
            model.bias -= lr * g_b
            total += loss * len(idx)
            count += len(idx)
        epoch_loss = total / count
        if not np.isfinite(epoch_loss) or not np.all(np.isfinite(model.weights)):
            raise TrainingDiverged(epoch, epoch_loss)
        losses.append(epoch_loss)
        logger.debug("epoch %d lr=%.3g loss=%.6g", epoch, lr, epoch_loss)
        lr *= cfg.decay
    return model, losses


def evaluate(model: LinearForecastModel, test_windows: Sequence[WindowPair]) -> dict:
    """MSE and MAE of un-augmented forecasts, averaged over windows."""
    if not test_windows:
        raise ConfigError("test set is empty")
    hist, fut = stack_windows(test_windows)
    pred = model.predict_batch(hist)
    return {"mse": mse(pred, fut), "mae": mae(pred, fut)}


def save_model(model: LinearForecastModel, path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "shape": {"c": model.c, "d": model.d, "h": model.h},
        "weights": model.weights.reshape(-1).tolist(),
        "bias": model.bias.tolist(),
    }
    Path(path).write_text(json.dumps(payload))


def load_model(path) -> LinearForecastModel:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a forecaster checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    c, d, h = (payload["shape"][k] for k in ("c", "d", "h"))
    weights = np.asarray(payload["weights"], dtype=np.float64).reshape(c * h, c * d)
    return LinearForecastModel(weights, np.asarray(payload["bias"]), c, d, h)
