"""Adjoint-method gradients for the continuous-time cells.

Going backward over each input frame we integrate three quantities together:
the state x (reconstructed in reverse from the stored end-of-frame state), the
adjoint a = dL/dx obeying da/dt = -a^T df/dx, and the parameter integral
int a^T df/dtheta dt.  Parameter gradients therefore come from a continuous
adjoint ODE rather than from differentiating the solver.
"""
from __future__ import annotations

import numpy as np

from ltcnav.ctcell import dynamics
from ltcnav.ctcell.params import CellKind, CellParams
from ltcnav.ctcell.solvers import SolverConfig, SolverMethod, cell_output_vjp
from ltcnav.errors import ContractViolation, UnsupportedArchitecture
from ltcnav.train.loss import cosine_loss_and_grad
from ltcnav.train.policy import GradientBundle, Policy

CONTINUOUS = (CellKind.LTC, CellKind.CTRNN, CellKind.ODERNN)


def _accumulate(acc: dict, grads: dict, scale: float) -> None:
    for k, v in grads.items():
        if k in acc:
            acc[k] = acc[k] + scale * v
        else:
            acc[k] = scale * v


def _augmented(params: CellParams, x, I, a):
    """Reverse-time derivatives (d/ds with s = -t) of x, a, theta-integral, I-integral."""
    gx, gI, grads = dynamics.rhs_vjp(params, x, I, a)
    return -dynamics.rhs(params, x, I), gx, grads, gI


def adjoint_solve(params: CellParams, x_end: np.ndarray, a_end: np.ndarray, I: np.ndarray,
                  duration: float, dt: float, method: SolverMethod | str = SolverMethod.RK4):
    """Integrate the augmented system backward from t_end to t_end - duration.

    Returns ``(x_start, a_start, grads, g_I)`` where ``grads`` holds
    int a^T df/dtheta dt and ``g_I`` holds int a^T df/dI dt over the interval.
    The semi-implicit LTC method has no adjoint form and is replaced by RK4.
    """
    if params.kind not in CONTINUOUS:
        raise UnsupportedArchitecture(f"adjoint gradients need continuous dynamics, not {params.kind.value}")
    if duration < 0 or dt <= 0:
        raise ContractViolation("duration must be >= 0 and dt > 0")
    method = SolverMethod(method)
    x = np.array(x_end, dtype=float)
    a = np.array(a_end, dtype=float)
    grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    g_I = np.zeros_like(np.asarray(I, dtype=float))
    n = int(round(duration / dt))
    if n == 0:
        return x, a, grads, g_I
    h = duration / n
    for _ in range(n):
        if method is SolverMethod.EULER:
            dx, da, gr, gi = _augmented(params, x, I, a)
            _accumulate(grads, gr, h)
            g_I = g_I + h * gi
            x, a = x + h * dx, a + h * da
            continue
        dx1, da1, gr1, gi1 = _augmented(params, x, I, a)
        dx2, da2, gr2, gi2 = _augmented(params, x + 0.5 * h * dx1, I, a + 0.5 * h * da1)
        dx3, da3, gr3, gi3 = _augmented(params, x + 0.5 * h * dx2, I, a + 0.5 * h * da2)
        dx4, da4, gr4, gi4 = _augmented(params, x + h * dx3, I, a + h * da3)
        for gr, w in ((gr1, 1.0), (gr2, 2.0), (gr3, 2.0), (gr4, 1.0)):
            _accumulate(grads, gr, h * w / 6.0)
        g_I = g_I + h / 6.0 * (gi1 + 2 * gi2 + 2 * gi3 + gi4)
        x = x + h / 6.0 * (dx1 + 2 * dx2 + 2 * dx3 + dx4)
        a = a + h / 6.0 * (da1 + 2 * da2 + 2 * da3 + da4)
    return x, a, grads, g_I


def adjoint_gradients(policy: Policy, frames: np.ndarray, labels: np.ndarray,
                      cfg: SolverConfig | None = None) -> GradientBundle:
    """Gradients of the mean cosine loss via the adjoint ODE.

    The forward pass uses ``cfg`` (default: the policy's solver); the backward
    pass integrates over each frame with the same step size, restarting the
    reverse state reconstruction from the stored end-of-frame state.
    """
    cell = policy.cell
    if cell.kind not in CONTINUOUS:
        raise UnsupportedArchitecture(f"adjoint gradients need continuous dynamics, not {cell.kind.value}")
    if labels.shape != frames.shape[:2] + (3,):
        raise ContractViolation(f"labels {labels.shape} do not match frames {frames.shape[:2]}")
    cfg = cfg or policy.solver
    saved = policy.solver
    policy.solver = cfg
    try:
        preds, cache = policy.forward_rollout(frames)
    finally:
        policy.solver = saved
    loss, g_pred = cosine_loss_and_grad(preds, labels)
    B, T = g_pred.shape[:2]
    grads = {
        "readout.W": np.einsum("bti,btj->ij", g_pred, cache.outputs),
        "readout.b": g_pred.sum(axis=(0, 1)),
    }
    cell_grads = {k: np.zeros_like(v) for k, v in cell.tensors.items()}
    g_feats = np.zeros_like(cache.features)
    a = np.zeros_like(cache.x0)
    method = SolverMethod.RK4 if cfg.method is SolverMethod.FUSED else cfg.method
    for t in range(T - 1, -1, -1):
        g_out = np.zeros((B, cell.state_dim))
        g_out[:, policy.motor_index] = g_pred[:, t] @ policy.readout_W
        a = a + cell_output_vjp(cell, g_out)
        I = cache.features[:, t]
        tape = cache.tapes[t]
        if tape[0] == "odernn":
            _, _, pre, out = tape
            a, gI_jump, gr = dynamics.odernn_jump_vjp(cell, pre, I, out, a)
            g_feats[:, t] += gI_jump
            _accumulate(cell_grads, gr, 1.0)
            x_end = pre
        else:
            x_end = cache.states[t]
        _, a, gr, gI = adjoint_solve(cell, x_end, a, I, cfg.frame_dt, cfg.dt, method)
        g_feats[:, t] += gI
        _accumulate(cell_grads, gr, 1.0)
    for k, v in cell_grads.items():
        grads["cell." + k] = v
    grads.update(policy.conv.backward(cache.images, cache.acts, g_feats.reshape(B * T, -1)))
    bundle = GradientBundle(grads, loss)
    bundle.check_shapes(policy)
    return bundle
