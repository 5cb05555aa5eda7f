"""Discrete gated cells: CT-GRU (Mozer et al.) and LSTM.

Both advance once per input frame. The CT-GRU keeps a bank of exponentially
decaying traces per neuron; the timescales of retrieval and storage are
selected by softmax over the fixed log-timescale bank.
"""
from __future__ import annotations

import numpy as np

from ltcnav.ctcell.params import CellKind, CellParams
from ltcnav.errors import ContractViolation


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def bank_weights(log_tau: np.ndarray, log_bank: np.ndarray) -> np.ndarray:
    """softmax_i(-(log_tau - log_bank_i)^2) along a new trailing axis."""
    e = -(log_tau[..., None] - log_bank) ** 2
    e = e - e.max(axis=-1, keepdims=True)
    w = np.exp(e)
    return w / w.sum(axis=-1, keepdims=True)


def _bank_weights_vjp(log_tau, log_bank, s, g_s):
    g_e = s * (g_s - (s * g_s).sum(-1, keepdims=True))
    return (g_e * (-2.0) * (log_tau[..., None] - log_bank)).sum(-1)


def _check_gated(params: CellParams, x: np.ndarray, I: np.ndarray, kind: CellKind) -> None:
    if params.kind is not kind:
        raise ContractViolation(f"expected {kind.value} params, got {params.kind.value}")
    if x.shape[-1] != params.state_size:
        raise ContractViolation(f"state has length {x.shape[-1]}, expected {params.state_size}")
    if I.shape[-1] != params.input_dim:
        raise ContractViolation(f"input has length {I.shape[-1]}, expected {params.input_dim}")


def ctgru_forward(params: CellParams, x: np.ndarray, I: np.ndarray, frame_dt: float):
    """One CT-GRU update. ``x`` is the flattened (D, M) trace bank."""
    _check_gated(params, x, I, CellKind.CTGRU)
    squeeze = x.ndim == 1
    x2, I2 = np.atleast_2d(x), np.atleast_2d(I)
    B = x2.shape[0]
    D, M = params.state_dim, params.bank_size
    t = params.tensors
    bank = params.extra["log_tau_bank"]
    traces = x2.reshape(B, D, M)
    h = traces.sum(-1)
    log_r = I2 @ t["W_R"].T + h @ t["U_R"].T + t["b_R"]
    s_r = bank_weights(log_r, bank)
    r = (s_r * traces).sum(-1)
    q = np.tanh(I2 @ t["W_Q"].T + r @ t["U_Q"].T + t["b_Q"])
    log_s = I2 @ t["W_S"].T + h @ t["U_S"].T + t["b_S"]
    s_s = bank_weights(log_s, bank)
    decay = np.exp(-frame_dt / np.exp(bank))
    new = ((1.0 - s_s) * traces + s_s * q[..., None]) * decay
    out = new.reshape(B, D * M)
    cache = (x2, I2, traces, h, log_r, s_r, r, q, log_s, s_s, decay)
    return (out[0] if squeeze else out), cache


def ctgru_backward(params: CellParams, cache, g_out: np.ndarray):
    x2, I2, traces, h, log_r, s_r, r, q, log_s, s_s, decay = cache
    t = params.tensors
    bank = params.extra["log_tau_bank"]
    B = x2.shape[0]
    D, M = params.state_dim, params.bank_size
    squeeze = g_out.ndim == 1
    g_new = np.atleast_2d(g_out).reshape(B, D, M)
    g_pre = g_new * decay
    g_tr = g_pre * (1.0 - s_s)
    g_ss = g_pre * (q[..., None] - traces)
    g_q = (g_pre * s_s).sum(-1)
    g_ls = _bank_weights_vjp(log_s, bank, s_s, g_ss)
    g_zq = g_q * (1.0 - q * q)
    g_r = g_zq @ t["U_Q"]
    g_sr = g_r[..., None] * traces
    g_tr = g_tr + g_r[..., None] * s_r
    g_lr = _bank_weights_vjp(log_r, bank, s_r, g_sr)
    g_h = g_ls @ t["U_S"] + g_lr @ t["U_R"]
    g_tr = g_tr + g_h[..., None]
    g_I = g_ls @ t["W_S"] + g_zq @ t["W_Q"] + g_lr @ t["W_R"]
    grads = {
        "W_S": g_ls.T @ I2, "U_S": g_ls.T @ h, "b_S": g_ls.sum(0),
        "W_Q": g_zq.T @ I2, "U_Q": g_zq.T @ r, "b_Q": g_zq.sum(0),
        "W_R": g_lr.T @ I2, "U_R": g_lr.T @ h, "b_R": g_lr.sum(0),
    }
    g_x = g_tr.reshape(B, D * M)
    if squeeze:
        return g_x[0], g_I[0], grads
    return g_x, g_I, grads


def ctgru_output(params: CellParams, x: np.ndarray) -> np.ndarray:
    D, M = params.state_dim, params.bank_size
    return x.reshape(*x.shape[:-1], D, M).sum(-1)


def lstm_forward(params: CellParams, x: np.ndarray, I: np.ndarray):
    """One LSTM update; state is concat(h, c)."""
    _check_gated(params, x, I, CellKind.LSTM)
    squeeze = x.ndim == 1
    x2, I2 = np.atleast_2d(x), np.atleast_2d(I)
    D = params.state_dim
    t = params.tensors
    h, c = x2[:, :D], x2[:, D:]
    z = I2 @ t["W"].T + h @ t["U"].T + t["b"]
    i = _sigmoid(z[:, :D])
    f = _sigmoid(z[:, D:2 * D])
    g = np.tanh(z[:, 2 * D:3 * D])
    o = _sigmoid(z[:, 3 * D:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    out = np.concatenate([h_new, c_new], axis=1)
    cache = (I2, h, c, i, f, g, o, tc)
    return (out[0] if squeeze else out), cache


def lstm_backward(params: CellParams, cache, g_out: np.ndarray):
    I2, h, c, i, f, g, o, tc = cache
    D = params.state_dim
    t = params.tensors
    squeeze = g_out.ndim == 1
    g2 = np.atleast_2d(g_out)
    g_h, g_c = g2[:, :D], g2[:, D:]
    g_o = g_h * tc
    g_c = g_c + g_h * o * (1.0 - tc * tc)
    gz = np.concatenate([
        g_c * g * i * (1.0 - i),
        g_c * c * f * (1.0 - f),
        g_c * i * (1.0 - g * g),
        g_o * o * (1.0 - o),
    ], axis=1)
    grads = {"W": gz.T @ I2, "U": gz.T @ h, "b": gz.sum(0)}
    g_x = np.concatenate([gz @ t["U"], g_c * f], axis=1)
    g_I = gz @ t["W"]
    if squeeze:
        return g_x[0], g_I[0], grads
    return g_x, g_I, grads


def lstm_output(params: CellParams, x: np.ndarray) -> np.ndarray:
    return x[..., :params.state_dim]
