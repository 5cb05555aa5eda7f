"""Continuous-time recurrent cells (LTC, CT-RNN, ODE-RNN) and gated baselines."""
from ltcnav.ctcell.builder import ARCHITECTURES, build_cell, cell_param_count, matched_state_dim
from ltcnav.ctcell.dynamics import ctrnn_rhs, ltc_rhs, odernn_flow, rhs, rhs_vjp
from ltcnav.ctcell.params import CellKind, CellParams, init_cell_params, zero_state
from ltcnav.ctcell.solvers import (
    FRAME_DT,
    CellState,
    SolverConfig,
    SolverMethod,
    cell_output,
    default_solver,
    frame_backward,
    frame_forward,
    integrate,
    step,
)
from ltcnav.ctcell.wiring import NcpWiring, build_ncp_mask, reachable_from_sensory


def ctgru_step(params: CellParams, state: CellState, I, frame_dt: float = FRAME_DT) -> CellState:
    from ltcnav.ctcell.gated import ctgru_forward

    x, _ = ctgru_forward(params, state.x, I, frame_dt)
    return CellState(x, state.t + frame_dt)


def lstm_step(params: CellParams, state: CellState, I, frame_dt: float = FRAME_DT) -> CellState:
    from ltcnav.ctcell.gated import lstm_forward

    x, _ = lstm_forward(params, state.x, I)
    return CellState(x, state.t + frame_dt)


__all__ = [
    "ARCHITECTURES", "CellKind", "CellParams", "CellState", "FRAME_DT", "NcpWiring",
    "SolverConfig", "SolverMethod", "build_cell", "build_ncp_mask", "cell_output",
    "cell_param_count", "ctgru_step", "ctrnn_rhs", "default_solver", "frame_backward",
    "frame_forward", "init_cell_params", "integrate", "lstm_step", "ltc_rhs",
    "matched_state_dim", "odernn_flow", "reachable_from_sensory", "rhs", "rhs_vjp",
    "step", "zero_state",
]
