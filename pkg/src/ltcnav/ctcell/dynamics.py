"""Right-hand sides of the continuous-time cells and their VJPs.

All functions accept a single vector or a batch (rows are samples). VJPs
return parameter gradients summed over the batch.
"""
from __future__ import annotations

import numpy as np

from ltcnav.ctcell.params import CellKind, CellParams
from ltcnav.errors import ContractViolation, UnsupportedArchitecture


def _check(params: CellParams, x: np.ndarray, I: np.ndarray | None, kind: CellKind | tuple) -> None:
    kinds = kind if isinstance(kind, tuple) else (kind,)
    if params.kind not in kinds:
        raise UnsupportedArchitecture(
            f"operation requires {[k.value for k in kinds]}, got {params.kind.value}")
    if x.shape[-1] != params.state_dim:
        raise ContractViolation(f"state has length {x.shape[-1]}, expected {params.state_dim}")
    if I is not None and I.shape[-1] != params.input_dim:
        raise ContractViolation(f"input has length {I.shape[-1]}, expected {params.input_dim}")


def synaptic_drive(params: CellParams, x: np.ndarray, I: np.ndarray) -> np.ndarray:
    """W_r x + W I + b."""
    t = params.tensors
    return x @ t["W_r"].T + I @ t["W"].T + t["b"]


def ltc_rhs(params: CellParams, x: np.ndarray, I: np.ndarray) -> np.ndarray:
    """dx/dt = -[1/tau + f] * x + f * A with f = tanh(W_r x + W I + b)."""
    x = np.asarray(x, dtype=float)
    I = np.asarray(I, dtype=float)
    _check(params, x, I, CellKind.LTC)
    f = np.tanh(synaptic_drive(params, x, I))
    t = params.tensors
    return -(1.0 / t["tau"] + f) * x + f * t["A"]


def ctrnn_rhs(params: CellParams, x: np.ndarray, I: np.ndarray) -> np.ndarray:
    """dx/dt = -x / tau + tanh(W_r x + W I + b)."""
    x = np.asarray(x, dtype=float)
    I = np.asarray(I, dtype=float)
    _check(params, x, I, CellKind.CTRNN)
    return -x / params.tensors["tau"] + np.tanh(synaptic_drive(params, x, I))


def odernn_flow(params: CellParams, x: np.ndarray, I: np.ndarray | None = None) -> np.ndarray:
    """Autonomous neural-ODE flow of the ODE-RNN: dx/dt = tanh(W_f x + b_f).

    ``I`` is accepted for a uniform signature and ignored: the flow has no
    input channel.
    """
    x = np.asarray(x, dtype=float)
    _check(params, x, None, CellKind.ODERNN)
    t = params.tensors
    return np.tanh(x @ t["W_f"].T + t["b_f"])


def odernn_jump(params: CellParams, x: np.ndarray, I: np.ndarray) -> np.ndarray:
    """Observation update of the ODE-RNN: tanh(W_r x + W I + b)."""
    return np.tanh(synaptic_drive(params, x, I))


def rhs(params: CellParams, x: np.ndarray, I: np.ndarray) -> np.ndarray:
    if params.kind is CellKind.LTC:
        return ltc_rhs(params, x, I)
    if params.kind is CellKind.CTRNN:
        return ctrnn_rhs(params, x, I)
    if params.kind is CellKind.ODERNN:
        return odernn_flow(params, x, I)
    raise UnsupportedArchitecture(f"{params.kind.value} has no continuous right-hand side")


def _masked(params: CellParams, grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    for name, mask in params.masks().items():
        if name in grads:
            grads[name] = grads[name] * mask
    return grads


def rhs_vjp(params: CellParams, x: np.ndarray, I: np.ndarray, a: np.ndarray):
    """Pull a cotangent ``a`` back through rhs at (x, I).

    Returns ``(a^T d rhs/dx, a^T d rhs/dI, {name: a^T d rhs/d theta})``.
    """
    x2 = np.atleast_2d(x)
    I2 = np.atleast_2d(I)
    a2 = np.atleast_2d(a)
    t = params.tensors
    kind = params.kind
    if kind is CellKind.ODERNN:
        f = np.tanh(x2 @ t["W_f"].T + t["b_f"])
        gz = a2 * (1.0 - f * f)
        gx = gz @ t["W_f"]
        grads = {"W_f": gz.T @ x2, "b_f": gz.sum(0)}
        gI = np.zeros_like(I2)
    elif kind in (CellKind.LTC, CellKind.CTRNN):
        f = np.tanh(synaptic_drive(params, x2, I2))
        tau = t["tau"]
        if kind is CellKind.LTC:
            gf = a2 * (t["A"] - x2)
            gx = -a2 / tau - a2 * f
        else:
            gf = a2
            gx = -a2 / tau
        gz = gf * (1.0 - f * f)
        gx = gx + gz @ t["W_r"]
        gI = gz @ t["W"]
        grads = {
            "tau": (a2 * x2).sum(0) / tau ** 2,
            "W_r": gz.T @ x2,
            "W": gz.T @ I2,
            "b": gz.sum(0),
        }
        if kind is CellKind.LTC:
            grads["A"] = (a2 * f).sum(0)
    else:
        raise UnsupportedArchitecture(f"{kind.value} has no continuous right-hand side")
    grads = _masked(params, grads)
    if np.ndim(x) == 1:
        gx = gx[0]
    if np.ndim(I) == 1:
        gI = gI[0]
    return gx, gI, grads


def rhs_jacobian_x(params: CellParams, x: np.ndarray, I: np.ndarray) -> np.ndarray:
    """Dense d rhs / dx for a single state vector (D x D)."""
    D = params.state_dim
    rows = np.zeros((D, D))
    for i in range(D):
        e = np.zeros(D)
        e[i] = 1.0
        rows[i] = rhs_vjp(params, x, I, e)[0]
    return rows


def odernn_jump_vjp(params: CellParams, x: np.ndarray, I: np.ndarray, out: np.ndarray, g: np.ndarray):
    """VJP of the ODE-RNN observation update given its output ``out``."""
    t = params.tensors
    x2, I2, g2, o2 = (np.atleast_2d(v) for v in (x, I, g, out))
    gz = g2 * (1.0 - o2 * o2)
    grads = _masked(params, {"W_r": gz.T @ x2, "W": gz.T @ I2, "b": gz.sum(0)})
    gx = gz @ t["W_r"]
    gI = gz @ t["W"]
    if np.ndim(x) == 1:
        gx, gI = gx[0], gI[0]
    return gx, gI, grads
