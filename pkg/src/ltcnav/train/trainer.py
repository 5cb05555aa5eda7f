"""Behavior-cloning trainer: minibatch Adam over fixed-length episode windows."""
from __future__ import annotations

import csv
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ltcnav.errors import ConfigurationError, ContractViolation
from ltcnav.train.adjoint import adjoint_gradients
from ltcnav.train.loss import LossValue
from ltcnav.train.optim import Adam
from ltcnav.train.policy import Policy, bptt_gradients, save_policy, sequence_loss


class GradientMode(str, Enum):
    BPTT = "BPTT"
    ADJOINT = "Adjoint"


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    minibatch: int = 8
    sequence_length: int = 64
    max_epochs: int = 30
    gradient_mode: GradientMode = GradientMode.BPTT
    patience: int = 8              # epochs without validation improvement before stopping
    val_fraction: float = 0.1
    seed: int = 0
    lr_overrides: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.gradient_mode = GradientMode(self.gradient_mode)
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be nonnegative")
        if self.minibatch < 1 or self.sequence_length < 1 or self.max_epochs < 0 or self.patience < 1:
            raise ConfigurationError("minibatch, sequence_length and patience must be >= 1")
        if not 0 <= self.val_fraction < 1:
            raise ConfigurationError("val_fraction must lie in [0, 1)")


@dataclass
class Window:
    """One training sequence: uint8 frames (T, H, W, 3) and unit labels (T, 3)."""
    frames: np.ndarray
    labels: np.ndarray
    episode: str = ""

    def __post_init__(self):
        if self.frames.ndim != 4 or self.labels.shape != (self.frames.shape[0], 3):
            raise ContractViolation(f"window frames {self.frames.shape} / labels {self.labels.shape} mismatch")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: LossValue
    val_loss: LossValue


@dataclass
class TrainResult:
    policy: Policy                  # best-validation checkpoint
    best_epoch: int
    history: list[EpochRecord]

    def curves(self) -> np.ndarray:
        return np.array([[r.epoch, r.train_loss.value, r.val_loss.value] for r in self.history])


def split_by_episode(windows: list[Window], val_fraction: float, seed: int):
    """Deterministic train/validation split that never separates an episode."""
    episodes = sorted({w.episode for w in windows})
    order = np.random.default_rng(seed).permutation(len(episodes))
    n_val = int(round(val_fraction * len(episodes)))
    if len(episodes) > 1:
        n_val = min(max(n_val, 1 if val_fraction > 0 else 0), len(episodes) - 1)
    else:
        n_val = 0
    val_eps = {episodes[i] for i in order[:n_val]}
    train = [w for w in windows if w.episode not in val_eps]
    val = [w for w in windows if w.episode in val_eps]
    return train, val


def _stack(windows: list[Window]):
    return np.stack([w.frames for w in windows]), np.stack([w.labels for w in windows])


def evaluate_loss(policy: Policy, windows: list[Window], batch: int = 8) -> LossValue:
    """Mean cosine loss over windows (each window weighted equally)."""
    total, flagged = 0.0, 0
    for i in range(0, len(windows), batch):
        frames, labels = _stack(windows[i:i + batch])
        lv = sequence_loss(policy, frames, labels)
        total += lv.value * len(frames)
        flagged += lv.flagged
    return LossValue(total / len(windows), flagged)


def train_policy(windows: list[Window], policy: Policy, cfg: TrainConfig, log=None) -> TrainResult:
    """Train ``policy`` in place and return the best-validation copy.

    Single worker and fully deterministic: identical inputs give bitwise
    identical curves. A dataset with one episode validates on its training set.
    """
    if not windows:
        raise ConfigurationError("training dataset is empty")
    for w in windows:
        if w.frames.shape[0] != cfg.sequence_length:
            raise ConfigurationError(
                f"window length {w.frames.shape[0]} != sequence_length {cfg.sequence_length}")
    train, val = split_by_episode(windows, cfg.val_fraction, cfg.seed)
    if not val:
        val = train
    grad_fn = bptt_gradients if cfg.gradient_mode is GradientMode.BPTT else adjoint_gradients
    opt = Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, overrides=dict(cfg.lr_overrides))
    params = policy.parameters()
    rng = np.random.default_rng(cfg.seed)

    best = policy.copy()
    best_val = evaluate_loss(policy, val).value
    best_epoch, stale = 0, 0
    history: list[EpochRecord] = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(train))
        losses, weights, flagged = [], [], 0
        for i in range(0, len(order), cfg.minibatch):
            frames, labels = _stack([train[j] for j in order[i:i + cfg.minibatch]])
            bundle = grad_fn(policy, frames, labels)
            opt.update(params, bundle.grads)
            losses.append(bundle.loss.value)
            weights.append(len(frames))
            flagged += bundle.loss.flagged
        train_loss = LossValue(float(np.average(losses, weights=weights)), flagged)
        val_loss = evaluate_loss(policy, val)
        history.append(EpochRecord(epoch, train_loss, val_loss))
        if log:
            log(f"epoch {epoch}: train {train_loss.value:.4f} val {val_loss.value:.4f}")
        if val_loss.value < best_val:
            best, best_val, best_epoch, stale = policy.copy(), val_loss.value, epoch, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    best.meta.update(best_epoch=best_epoch, best_val_loss=repr(best_val))
    return TrainResult(best, best_epoch, history)


def write_curves(path: str | os.PathLike, result: TrainResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss"])
        for r in result.history:
            w.writerow([r.epoch, repr(r.train_loss.value), repr(r.val_loss.value)])


def save_checkpoint(directory: str | os.PathLike, result: TrainResult, cfg: TrainConfig,
                    extra: dict | None = None) -> Path:
    """Write policy.lnav, manifest.txt (key=value) and curves.csv into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    save_policy(out / "policy.lnav", result.policy)
    write_curves(out / "curves.csv", result)
    lines = {f"train.{k}": (v.value if isinstance(v, Enum) else v) for k, v in asdict(cfg).items()}
    lines["arch"] = result.policy.arch
    lines["best_epoch"] = result.best_epoch
    for r in result.history:
        lines[f"epoch.{r.epoch}"] = f"{r.train_loss.value!r},{r.val_loss.value!r}"
    lines.update(extra or {})
    (out / "manifest.txt").write_text("".join(f"{k}={v}\n" for k, v in lines.items()))
    return out
