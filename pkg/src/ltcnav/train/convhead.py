"""Rectified convolutional head with a hand-written backward pass (NHWC layout)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ltcnav.errors import ConfigurationError, ContractViolation

DEFAULT_LAYERS = ((16, 5, 3), (32, 3, 2), (64, 2, 2), (8, 2, 2))  # (filters, kernel, stride)
CHUNK = 128  # frames per im2col block


def output_size(n: int, kernel: int, stride: int) -> int:
    return (n - kernel) // stride + 1


def _im2col(x: np.ndarray, k: int, s: int) -> np.ndarray:
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
    n, ho, wo, c = win.shape[:4]
    return win.reshape(n * ho * wo, c * k * k)


@dataclass
class ConvHead:
    input_hw: tuple[int, int]
    layers: tuple[tuple[int, int, int], ...] = DEFAULT_LAYERS
    in_channels: int = 3
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def default(cls, input_hw=(64, 64), layers=DEFAULT_LAYERS, rng=None) -> "ConvHead":
        head = cls(tuple(input_hw), tuple(tuple(l) for l in layers))
        head.init(rng)
        return head

    def __post_init__(self):
        h, w = self.input_hw
        for f, k, s in self.layers:
            h, w = output_size(h, k, s), output_size(w, k, s)
            if h < 1 or w < 1:
                raise ConfigurationError(
                    f"conv layers {self.layers} collapse input {self.input_hw} to {h}x{w}")

    def init(self, rng=None) -> None:
        """He-uniform weights, zero biases."""
        rng = np.random.default_rng(rng)
        self.weights, self.biases = [], []
        c = self.in_channels
        for f, k, _ in self.layers:
            bound = np.sqrt(6.0 / (c * k * k))
            self.weights.append(rng.uniform(-bound, bound, size=(f, c, k, k)))
            self.biases.append(np.zeros(f))
            c = f

    def shapes(self) -> list[tuple[int, int, int]]:
        """Spatial output shape (H, W, C) of every layer."""
        h, w = self.input_hw
        out = []
        for f, k, s in self.layers:
            h, w = output_size(h, k, s), output_size(w, k, s)
            out.append((h, w, f))
        return out

    @property
    def feature_dim(self) -> int:
        h, w, c = self.shapes()[-1]
        return h * w * c

    def param_count(self) -> int:
        c, total = self.in_channels, 0
        for f, k, _ in self.layers:
            total += f * c * k * k + f
            c = f
        return total

    def parameters(self, prefix: str = "conv.") -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}{i}.w"] = w
            out[f"{prefix}{i}.b"] = b
        return out

    def forward(self, images: np.ndarray):
        """images (N, H, W, C) float -> (features (N, F), activations per layer)."""
        if images.ndim != 4 or tuple(images.shape[1:3]) != tuple(self.input_hw) \
                or images.shape[3] != self.in_channels:
            raise ContractViolation(
                f"expected images (N, {self.input_hw[0]}, {self.input_hw[1]}, {self.in_channels}), "
                f"got {images.shape}")
        acts = []
        x = images
        for (f, k, s), w, b in zip(self.layers, self.weights, self.biases):
            n = x.shape[0]
            ho, wo = output_size(x.shape[1], k, s), output_size(x.shape[2], k, s)
            wmat = w.reshape(f, -1).T
            out = np.empty((n, ho, wo, f))
            for start in range(0, n, CHUNK):
                cols = _im2col(x[start:start + CHUNK], k, s)
                blk = cols @ wmat
                blk += b
                out[start:start + CHUNK] = np.maximum(blk, 0.0).reshape(-1, ho, wo, f)
            acts.append(out)
            x = out
        return x.reshape(x.shape[0], -1), acts

    def backward(self, images: np.ndarray, acts: list[np.ndarray], g_features: np.ndarray,
                 prefix: str = "conv.", need_input_grad: bool = False):
        grads = {}
        g = g_features.reshape(acts[-1].shape)
        for li in range(len(self.layers) - 1, -1, -1):
            f, k, s = self.layers[li]
            x = images if li == 0 else acts[li - 1]
            out = acts[li]
            g = g * (out > 0)
            w = self.weights[li]
            n, ho, wo, _ = out.shape
            c = x.shape[3]
            gw = np.zeros((f, c * k * k))
            want_gx = li > 0 or need_input_grad
            gx = np.zeros_like(x, dtype=float) if want_gx else None
            wflat = w.reshape(f, -1)
            for start in range(0, n, CHUNK):
                gblk = g[start:start + CHUNK].reshape(-1, f)
                cols = _im2col(x[start:start + CHUNK], k, s)
                gw += gblk.T @ cols
                if want_gx:
                    gcols = (gblk @ wflat).reshape(-1, ho, wo, c, k, k)
                    sub = gx[start:start + CHUNK]
                    for di in range(k):
                        for dj in range(k):
                            sub[:, di:di + s * (ho - 1) + 1:s, dj:dj + s * (wo - 1) + 1:s, :] += \
                                gcols[..., di, dj]
            grads[f"{prefix}{li}.w"] = gw.reshape(w.shape)
            grads[f"{prefix}{li}.b"] = g.sum(axis=(0, 1, 2))
            g = gx
        return (grads, g) if need_input_grad else grads
