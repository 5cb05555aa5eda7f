"""VisualBackprop saliency and the attention-on-target score."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ltcnav.errors import ContractViolation


@dataclass
class SaliencyMap:
    values: np.ndarray          # (H, W) in [0, 1]
    frame_id: int = -1
    degenerate: bool = False    # the mask was identically zero

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.min() < 0 or self.values.max() > 1:
            raise ContractViolation("saliency must be a 2-D map with values in [0, 1]")


def box_upsample(mask: np.ndarray, out_hw: tuple[int, int], kernel: int, stride: int) -> np.ndarray:
    """Transposed-stride placement: each cell spreads its value over its k x k input window.

    Input pixels outside every window stay zero.
    """
    out = np.zeros(out_hw)
    h, w = mask.shape
    for i in range(h):
        for j in range(w):
            out[i * stride:i * stride + kernel, j * stride:j * stride + kernel] += mask[i, j]
    return out


def visual_backprop(acts: list[np.ndarray], layers, input_hw, frame_id: int = -1) -> SaliencyMap:
    """Saliency for one frame from its per-layer activations (each (H, W, C)).

    ``layers`` holds the (filters, kernel, stride) of each activation's layer.
    """
    if not acts:
        raise ContractViolation("empty activation stack")
    if len(acts) != len(layers):
        raise ContractViolation("one (filters, kernel, stride) entry per activation is required")
    means = [a.mean(axis=-1) for a in acts]
    mask = means[-1]
    for li in range(len(acts) - 1, -1, -1):
        _, k, s = layers[li]
        below = means[li - 1].shape if li > 0 else tuple(input_hw)
        mask = box_upsample(mask, below, k, s)
        if li > 0:
            mask = mask * means[li - 1]
    lo, hi = mask.min(), mask.max()
    if hi - lo <= 0:
        if hi == 0:
            return SaliencyMap(np.zeros_like(mask), frame_id, degenerate=True)
        return SaliencyMap(np.ones_like(mask), frame_id)
    return SaliencyMap((mask - lo) / (hi - lo), frame_id)


def policy_saliency(policy, frame: np.ndarray, frame_id: int = -1) -> SaliencyMap:
    """Saliency of a policy's conv head for one uint8 or preprocessed frame."""
    from ltcnav.train.policy import preprocess
    _, acts = policy.conv.forward(preprocess(frame)[None])
    return visual_backprop([a[0] for a in acts], policy.conv.layers, policy.conv.input_hw, frame_id)


@dataclass(frozen=True)
class AttentionScore:
    value: float        # NaN when undefined
    undefined: bool = False


def attention_on_target_score(saliency: SaliencyMap | np.ndarray, box) -> AttentionScore:
    """Fraction of saliency mass inside ``box = (row0, col0, row1, col1)`` (half-open)."""
    s = saliency.values if isinstance(saliency, SaliencyMap) else np.asarray(saliency, dtype=float)
    r0, c0, r1, c1 = (int(v) for v in box)
    H, W = s.shape
    if not (0 <= r0 < r1 <= H and 0 <= c0 < c1 <= W):
        raise ContractViolation(f"box {box} is not inside a {H}x{W} image")
    total = s.sum()
    if total <= 0:
        return AttentionScore(float("nan"), True)
    return AttentionScore(float(s[r0:r1, c0:c1].sum() / total))


def bootstrap_interval(samples, level: float = 0.9, n_boot: int = 2000, seed: int = 0):
    """Percentile bootstrap interval of the mean."""
    x = np.asarray(samples, dtype=float)
    rng = np.random.default_rng(seed)
    means = x[rng.integers(0, len(x), size=(n_boot, len(x)))].mean(axis=1)
    a = (1 - level) / 2
    return float(np.quantile(means, a)), float(np.quantile(means, 1 - a))
