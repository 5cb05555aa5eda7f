"""Fixed-step solvers and the per-frame cell update.

Every frame update has a taped variant (``frame_forward``/``frame_backward``)
that records what reverse-mode differentiation needs, so BPTT can run through
solver substeps exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ltcnav.ctcell import dynamics, gated
from ltcnav.ctcell.params import CellKind, CellParams
from ltcnav.errors import ConfigurationError, ContractViolation, NumericalDivergence, UnsupportedArchitecture

FRAME_DT = 0.05  # 20 Hz recording
DEFAULT_UNFOLD = 6


class SolverMethod(str, Enum):
    EULER = "ExplicitEuler"
    FUSED = "SemiImplicitFused"
    RK4 = "RK4"


@dataclass(frozen=True)
class SolverConfig:
    method: SolverMethod = SolverMethod.RK4
    dt: float = FRAME_DT / DEFAULT_UNFOLD
    unfold_steps: int = DEFAULT_UNFOLD

    def __post_init__(self):
        object.__setattr__(self, "method", SolverMethod(self.method))
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if int(self.unfold_steps) != self.unfold_steps or self.unfold_steps < 1:
            raise ConfigurationError(f"unfold_steps must be an integer >= 1, got {self.unfold_steps}")

    @property
    def frame_dt(self) -> float:
        return self.dt * self.unfold_steps

    @classmethod
    def for_frame(cls, method: SolverMethod | str, unfold_steps: int = DEFAULT_UNFOLD,
                  frame_dt: float = FRAME_DT) -> "SolverConfig":
        return cls(SolverMethod(method), frame_dt / unfold_steps, unfold_steps)


def default_solver(kind: CellKind | str, unfold_steps: int = DEFAULT_UNFOLD) -> SolverConfig:
    method = SolverMethod.FUSED if CellKind(kind) is CellKind.LTC else SolverMethod.RK4
    return SolverConfig.for_frame(method, unfold_steps)


@dataclass
class CellState:
    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.t < 0:
            raise ContractViolation("time must be nonnegative")


def _add(acc: dict, grads: dict, scale: float = 1.0) -> None:
    for k, v in grads.items():
        if k in acc:
            acc[k] += scale * v
        else:
            acc[k] = scale * v


def _finite(x: np.ndarray, index: int, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericalDivergence(f"{what}: non-finite state after substep {index}", step_index=index)


# -- single substeps -------------------------------------------------------

def fused_ltc_substep(params: CellParams, x, I, dt):
    """x <- (x + dt f A) / (1 + dt (1/tau + f))."""
    t = params.tensors
    f = np.tanh(dynamics.synaptic_drive(params, x, I))
    den = 1.0 + dt * (1.0 / t["tau"] + f)
    x1 = (x + dt * f * t["A"]) / den
    return x1, (x, I, f, den, x1)


def fused_ltc_substep_vjp(params: CellParams, cache, g, dt):
    x, I, f, den, x1 = cache
    t = params.tensors
    x2, I2, f2, g2, x12 = (np.atleast_2d(v) for v in (x, I, f, g, x1))
    g_num = g2 / den
    g_den = -g2 * x12 / den
    g_f = g_num * dt * t["A"] + g_den * dt
    gz = g_f * (1.0 - f2 * f2)
    grads = {
        "A": (g_num * dt * f2).sum(0),
        "tau": (g_den * (-dt) / t["tau"] ** 2).sum(0),
        "W_r": gz.T @ x2,
        "W": gz.T @ I2,
        "b": gz.sum(0),
    }
    grads = dynamics._masked(params, grads)
    gx = g_num + gz @ t["W_r"]
    gI = gz @ t["W"]
    if np.ndim(x) == 1:
        gx, gI = gx[0], gI[0]
    return gx, gI, grads


def ode_substep(params: CellParams, x, I, dt, method: SolverMethod):
    f = dynamics.rhs
    if method is SolverMethod.EULER:
        return x + dt * f(params, x, I), (x,)
    if method is SolverMethod.RK4:
        k1 = f(params, x, I)
        k2 = f(params, x + 0.5 * dt * k1, I)
        k3 = f(params, x + 0.5 * dt * k2, I)
        k4 = f(params, x + dt * k3, I)
        return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), (x, k1, k2, k3)
    if method is SolverMethod.FUSED:
        if params.kind is not CellKind.LTC:
            raise UnsupportedArchitecture("the fused semi-implicit step is defined for LTC only")
        x1, cache = fused_ltc_substep(params, x, I, dt)
        return x1, cache
    raise ConfigurationError(f"unknown solver {method}")


def ode_substep_vjp(params: CellParams, cache, I, g, dt, method: SolverMethod):
    """Cotangent of one substep: returns (g_x, g_I, grads)."""
    vjp = dynamics.rhs_vjp
    if method is SolverMethod.EULER:
        (x,) = cache
        gx, gI, grads = vjp(params, x, I, dt * g)
        return g + gx, gI, grads
    if method is SolverMethod.RK4:
        x, k1, k2, k3 = cache
        grads: dict = {}
        g_k4 = dt / 6.0 * g
        g_k3 = dt / 3.0 * g
        g_k2 = dt / 3.0 * g
        g_k1 = dt / 6.0 * g
        gx = g.copy()
        v4, gI, gr = vjp(params, x + dt * k3, I, g_k4)
        _add(grads, gr)
        gx = gx + v4
        g_k3 = g_k3 + dt * v4
        v3, gI3, gr = vjp(params, x + 0.5 * dt * k2, I, g_k3)
        _add(grads, gr)
        gx = gx + v3
        g_k2 = g_k2 + 0.5 * dt * v3
        v2, gI2, gr = vjp(params, x + 0.5 * dt * k1, I, g_k2)
        _add(grads, gr)
        gx = gx + v2
        g_k1 = g_k1 + 0.5 * dt * v2
        v1, gI1, gr = vjp(params, x, I, g_k1)
        _add(grads, gr)
        gx = gx + v1
        return gx, gI + gI3 + gI2 + gI1, grads
    if method is SolverMethod.FUSED:
        return fused_ltc_substep_vjp(params, cache, g, dt)
    raise ConfigurationError(f"unknown solver {method}")


# -- frame updates ---------------------------------------------------------

def frame_forward(params: CellParams, x: np.ndarray, I: np.ndarray, cfg: SolverConfig,
                  frame_index: int = 0):
    """Advance the flat state by one input frame; returns (x_next, tape)."""
    kind = params.kind
    if kind is CellKind.CTGRU:
        out, cache = gated.ctgru_forward(params, x, I, cfg.frame_dt)
        _finite(out, frame_index, "CT-GRU update")
        return out, ("ctgru", cache)
    if kind is CellKind.LSTM:
        out, cache = gated.lstm_forward(params, x, I)
        _finite(out, frame_index, "LSTM update")
        return out, ("lstm", cache)
    if x.shape[-1] != params.state_dim or I.shape[-1] != params.input_dim:
        raise ContractViolation(
            f"state/input lengths {x.shape[-1]}/{I.shape[-1]} do not match "
            f"{params.state_dim}/{params.input_dim}")
    caches = []
    for s in range(cfg.unfold_steps):
        x, cache = ode_substep(params, x, I, cfg.dt, cfg.method)
        _finite(x, frame_index * cfg.unfold_steps + s, f"{kind.value} {cfg.method.value}")
        caches.append(cache)
    if kind is CellKind.ODERNN:
        pre = x
        x = dynamics.odernn_jump(params, pre, I)
        return x, ("odernn", caches, pre, x)
    return x, ("ode", caches)


def frame_backward(params: CellParams, tape, I: np.ndarray, g: np.ndarray, cfg: SolverConfig):
    """Reverse of ``frame_forward``: returns (g_x, g_I, grads)."""
    tag = tape[0]
    if tag == "ctgru":
        return gated.ctgru_backward(params, tape[1], g)
    if tag == "lstm":
        return gated.lstm_backward(params, tape[1], g)
    grads: dict = {}
    g_I = np.zeros_like(I, dtype=float)
    if tag == "odernn":
        _, caches, pre, out = tape
        g, gI_j, gr = dynamics.odernn_jump_vjp(params, pre, I, out, g)
        g_I = g_I + gI_j
        _add(grads, gr)
    else:
        caches = tape[1]
    for cache in reversed(caches):
        g, gI_s, gr = ode_substep_vjp(params, cache, I, g, cfg.dt, cfg.method)
        g_I = g_I + gI_s
        _add(grads, gr)
    return g, g_I, grads


def step(params: CellParams, state: CellState, I: np.ndarray, cfg: SolverConfig) -> CellState:
    """Advance a cell state by one frame interval."""
    x = np.asarray(state.x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ContractViolation("input state is not finite")
    x_next, _ = frame_forward(params, x, np.asarray(I, dtype=float), cfg)
    return CellState(x_next, state.t + cfg.frame_dt)


def integrate(params: CellParams, x0: np.ndarray, I: np.ndarray, n_steps: int, dt: float,
              method: SolverMethod | str = SolverMethod.RK4) -> np.ndarray:
    """Integrate the continuous dynamics for ``n_steps`` substeps of size ``dt``
    with constant input (no ODE-RNN observation jumps). Negative ``dt``
    integrates backward in time."""
    method = SolverMethod(method)
    x = np.asarray(x0, dtype=float)
    for s in range(n_steps):
        x, _ = ode_substep(params, x, I, dt, method)
        _finite(x, s, "integrate")
    return x


def cell_output(params: CellParams, x: np.ndarray) -> np.ndarray:
    """Visible hidden output of a flat state (h for LSTM, summed traces for CT-GRU)."""
    if params.kind is CellKind.LSTM:
        return gated.lstm_output(params, x)
    if params.kind is CellKind.CTGRU:
        return gated.ctgru_output(params, x)
    return x


def cell_output_vjp(params: CellParams, g_out: np.ndarray) -> np.ndarray:
    if params.kind is CellKind.LSTM:
        return np.concatenate([g_out, np.zeros_like(g_out)], axis=-1)
    if params.kind is CellKind.CTGRU:
        return np.repeat(g_out, params.bank_size, axis=-1)
    return g_out
