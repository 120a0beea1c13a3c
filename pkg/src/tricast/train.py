"""Training loop and evaluation: Adam with a per-epoch halved learning rate,
early stopping on validation MSE, best-state restoration, and standardized
MSE/MAE reporting with a per-horizon-step breakdown.

Runs are bit-reproducible: shuffling draws from a named stream per epoch, the
optimizer walks parameters in registry order, and lazily created text vectors
join the optimizer with their own step counts.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig, config_hash
from .data import WindowSample
from .errors import DataError, NumericError
from .model import ForecastModel, batches_by_text_count, save_checkpoint
from .nn import derive_rng
from .tensor import Tensor, backward, no_grad, square, tmean


class Adam:
    """Moment-tracking gradient descent; state appears lazily per parameter
    (keyed by identity) so vectors created mid-run start with fresh moments."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}
        self._t: dict[int, int] = {}

    def zero_grad(self, params) -> None:
        for p in params:
            p.grad = None

    def step(self, params) -> None:
        for p in params:
            if p.grad is None:
                continue
            key = id(p)
            if key not in self._m:
                self._m[key] = np.zeros_like(p.data)
                self._v[key] = np.zeros_like(p.data)
                self._t[key] = 0
            self._t[key] += 1
            t = self._t[key]
            g = p.grad
            self._m[key] = self.beta1 * self._m[key] + (1.0 - self.beta1) * g
            self._v[key] = self.beta2 * self._v[key] + (1.0 - self.beta2) * g * g
            m_hat = self._m[key] / (1.0 - self.beta1 ** t)
            v_hat = self._v[key] / (1.0 - self.beta2 ** t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def batch_loss(model: ForecastModel, batch: list[WindowSample]) -> Tensor:
    """Mean squared error of the fused forecast in standardized space."""
    forecast = model(batch).forecast
    target = Tensor(np.stack([s.target for s in batch]))
    return tmean(square(forecast - target))


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_mse: float
    lr: float


@dataclass
class TrainResult:
    history: list[EpochStats]
    best_epoch: int
    best_val_mse: float
    stopped_early: bool


def epoch_lr(cfg: TrainConfig, epoch: int) -> float:
    if cfg.lr_halving:
        return cfg.initial_lr * 0.5 ** epoch
    return cfg.initial_lr


def _snapshot(model: ForecastModel) -> dict[str, np.ndarray]:
    return {name: p.data.copy() for name, p in model.named_parameters()}


def _restore(model: ForecastModel, snap: dict[str, np.ndarray]) -> None:
    prefix = "texts.table."
    keep = {n[len(prefix):] for n in snap if n.startswith(prefix)}
    # text vectors born after the snapshot did not exist in the best state
    model.texts.table = {sid: t for sid, t in model.texts.table.items() if sid in keep}
    for name, p in model.named_parameters():
        p.data[...] = snap[name]


def train(model: ForecastModel, train_samples: list[WindowSample],
          val_samples: list[WindowSample], cfg: TrainConfig,
          checkpoint_path=None, max_steps: int | None = None,
          step_log: list | None = None) -> TrainResult:
    """Fit in place and leave the model at its best-validation state.

    max_steps caps the total number of optimizer updates (useful for smoke
    runs); step_log, when given, collects per-step training losses.
    """
    cfg.validate()
    opt = Adam(beta1=0.9, beta2=0.999, eps=1e-8)
    history: list[EpochStats] = []
    best_snap = _snapshot(model)
    best_val = float("inf")
    best_epoch = -1
    stale = 0
    stopped_early = False
    steps = 0
    for epoch in range(cfg.max_epochs):
        opt.lr = epoch_lr(cfg, epoch)
        order = derive_rng(cfg.seed, f"shuffle/{epoch}").permutation(len(train_samples))
        shuffled = [train_samples[i] for i in order]
        losses = []
        for batch in batches_by_text_count(shuffled, cfg.batch_size):
            if max_steps is not None and steps >= max_steps:
                break
            params = model.parameters()
            opt.zero_grad(params)
            loss = batch_loss(model, batch)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"training diverged at epoch {epoch}: loss={value}")
            backward(loss)
            opt.step(model.parameters())
            losses.append(value)
            if step_log is not None:
                step_log.append(value)
            steps += 1
        val_mse = evaluate(model, val_samples, cfg.batch_size).mse
        train_loss = float(np.mean(losses)) if losses else float("nan")
        history.append(EpochStats(epoch, train_loss, val_mse, opt.lr))
        if val_mse < best_val:
            best_val = val_mse
            best_epoch = epoch
            best_snap = _snapshot(model)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                stopped_early = True
                break
        if max_steps is not None and steps >= max_steps:
            break
    _restore(model, best_snap)
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path, cfg,
                        best_epoch=best_epoch, best_val_mse=best_val)
    return TrainResult(history, best_epoch, best_val, stopped_early)


@dataclass
class EvalReport:
    mse: float
    mae: float
    per_step_mse: np.ndarray = field(repr=False)
    per_step_mae: np.ndarray = field(repr=False)
    n_windows: int = 0


def error_report(forecast: np.ndarray, target: np.ndarray) -> EvalReport:
    """MSE/MAE over (windows, horizon, variables) stacks, averaged per
    horizon step and then across steps."""
    if forecast.shape != target.shape or forecast.ndim != 3:
        raise DataError(f"forecast/target stacks must share a (windows, horizon, "
                        f"vars) shape, got {forecast.shape} and {target.shape}")
    err = forecast - target
    per_step_mse = (err ** 2).mean(axis=(0, 2))
    per_step_mae = np.abs(err).mean(axis=(0, 2))
    return EvalReport(mse=float(per_step_mse.mean()), mae=float(per_step_mae.mean()),
                      per_step_mse=per_step_mse, per_step_mae=per_step_mae,
                      n_windows=forecast.shape[0])


def evaluate(model: ForecastModel, samples: list[WindowSample],
             batch_size: int = 32) -> EvalReport:
    """Standardized-space errors of the fused forecast over all windows."""
    if not samples:
        raise DataError("evaluate needs at least one window")
    forecasts, targets = [], []
    with no_grad():
        for batch in batches_by_text_count(samples, batch_size):
            forecasts.append(model(batch).forecast.data)
            targets.append(np.stack([s.target for s in batch]))
    report = error_report(np.concatenate(forecasts), np.concatenate(targets))
    report.n_windows = len(samples)
    return report


def last_value_report(samples: list[WindowSample]) -> EvalReport:
    """Reference forecaster: repeat each variable's final observed value."""
    if not samples:
        raise DataError("need at least one window")
    horizon = samples[0].target.shape[0]
    forecast = np.stack([np.tile(s.x_enc[-1], (horizon, 1)) for s in samples])
    target = np.stack([s.target for s in samples])
    return error_report(forecast, target)


def write_metrics_csv(path, rows: list[dict]) -> None:
    """rows carry dataset, horizon, mse, mae; floats keep full precision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "horizon", "mse", "mae"])
        for row in rows:
            writer.writerow([row["dataset"], row["horizon"],
                             repr(float(row["mse"])), repr(float(row["mae"]))])


def write_loss_log(path, history: list[EpochStats]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_mse", "lr"])
        for row in history:
            writer.writerow([row.epoch, repr(row.train_loss), repr(row.val_mse),
                             repr(row.lr)])


def write_run_manifest(path, model_cfg, train_cfg, **extra) -> None:
    payload = {"seed": train_cfg.seed, "config_hash": config_hash(model_cfg, train_cfg)}
    payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
