"""Bias-corrected Adam with optional per-compartment learning rates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ltcnav.errors import ConfigurationError, ContractViolation

TAU_FLOOR = 0.05  # time constants are projected back above this after each step


@dataclass
class Adam:
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    overrides: dict[str, float] = field(default_factory=dict)  # name prefix -> rate
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate < 0 or any(r < 0 for r in self.overrides.values()):
            raise ConfigurationError("learning rates must be nonnegative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("Adam betas must lie in [0, 1)")

    def rate_for(self, name: str) -> float:
        best, rate = -1, self.learning_rate
        for prefix, r in self.overrides.items():
            if name.startswith(prefix) and len(prefix) > best:
                best, rate = len(prefix), r
        return rate

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """One in-place step on every named tensor."""
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ContractViolation(f"gradient {name} has shape {g.shape}, parameter {p.shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.rate_for(name) * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if name.endswith(".tau"):
                np.maximum(p, TAU_FLOOR, out=p)


def adam_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], optimizer: Adam) -> dict:
    """Functional form: applies one step and returns ``params``."""
    optimizer.update(params, grads)
    return params
