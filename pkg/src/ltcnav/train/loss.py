"""Cosine-similarity loss on heading vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ltcnav.errors import ContractViolation

DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class LossValue:
    value: float
    flagged: int = 0  # degenerate predictions that contributed zero

    def __post_init__(self):
        if not -1.0 - 1e-12 <= self.value <= 1.0 + 1e-12:
            raise ContractViolation(f"cosine loss {self.value} outside [-1, 1]")

    def __float__(self) -> float:
        return self.value


def cosine_terms(pred: np.ndarray, label: np.ndarray):
    """Per-sample loss -cos(pred, label) and its gradient w.r.t. ``pred``.

    Samples with ||pred|| < 1e-12 contribute zero loss and zero gradient and
    are reported in the returned mask.
    """
    pred = np.asarray(pred, dtype=float)
    label = np.asarray(label, dtype=float)
    if pred.shape != label.shape or pred.shape[-1] != 3:
        raise ContractViolation(f"pred {pred.shape} and label {label.shape} must be (..., 3)")
    pn = np.linalg.norm(pred, axis=-1, keepdims=True)
    ln = np.linalg.norm(label, axis=-1, keepdims=True)
    degenerate = (pn < DEGENERATE_NORM)[..., 0]
    safe = np.where(pn < DEGENERATE_NORM, 1.0, pn)
    dot = (pred * label).sum(-1, keepdims=True)
    loss = np.clip(-(dot / (safe * ln))[..., 0], -1.0, 1.0)  # rounding can overshoot by an ulp
    grad = -(label / (safe * ln) - dot * pred / (safe ** 3 * ln))
    loss = np.where(degenerate, 0.0, loss)
    grad = np.where(degenerate[..., None], 0.0, grad)
    return loss, grad, degenerate


def cosine_loss(pred: np.ndarray, label: np.ndarray) -> LossValue:
    """Mean of -cos(pred, label) over all leading axes."""
    loss, _, deg = cosine_terms(pred, label)
    return LossValue(float(np.mean(loss)), int(deg.sum()))


def cosine_loss_and_grad(pred: np.ndarray, label: np.ndarray):
    """(LossValue, d mean-loss / d pred)."""
    loss, grad, deg = cosine_terms(pred, label)
    n = loss.size
    return LossValue(float(loss.mean()), int(deg.sum())), grad / n
