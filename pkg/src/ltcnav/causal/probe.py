"""Contrast probe: a plain neural-ODE flow versus an LTC under input interventions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ltcnav.causal.coefficients import external_coefficients_C
from ltcnav.ctcell import dynamics
from ltcnav.ctcell.params import CellKind, CellParams
from ltcnav.ctcell.solvers import integrate
from ltcnav.errors import UnsupportedArchitecture


@dataclass
class CausalityProbeReport:
    roundtrip_error: float          # |x0 - backward(forward(x0))|_inf
    invertible: bool                # roundtrip_error <= 1e-5
    input_sensitivity: float        # max |flow(x; I) - flow(x; I + delta)| along the trajectory
    ltc_c_norm: float | None        # |C| of the contrast LTC, if one was given
    horizon: float
    dt: float

    @property
    def responds_to_interventions(self) -> bool:
        return self.input_sensitivity != 0.0

    def lines(self) -> list[str]:
        out = [f"horizon={self.horizon}", f"dt={self.dt}",
               f"roundtrip_error={self.roundtrip_error:.3e}", f"invertible={self.invertible}",
               f"input_sensitivity={self.input_sensitivity!r}"]
        if self.ltc_c_norm is not None:
            out.append(f"ltc_C_norm={self.ltc_c_norm:.6g}")
        return out


def neural_ode_causality_probe(params: CellParams, x0, horizon: float = 1.0, dt: float = 1e-2,
                               contrast: CellParams | None = None, seed: int = 0) -> CausalityProbeReport:
    """Check invertibility of the autonomous flow and its blindness to input perturbations.

    The flow is integrated forward over ``horizon`` with RK4 and then backward
    by the same steps. Every state visited is re-evaluated with a random input
    perturbation; an autonomous flow must give bitwise identical derivatives.
    """
    if params.kind is not CellKind.ODERNN:
        raise UnsupportedArchitecture("the probe targets the autonomous neural-ODE flow (ODERNN)")
    x0 = np.asarray(x0, dtype=float)
    n = int(round(horizon / dt))
    I = np.zeros(params.input_dim)
    rng = np.random.default_rng(seed)
    traj = [x0]
    x = x0
    for _ in range(n):
        x = integrate(params, x, I, 1, dt, "RK4")
        traj.append(x)
    back = integrate(params, x, I, n, -dt, "RK4")
    roundtrip = float(np.max(np.abs(back - x0)))
    sens = 0.0
    for xs in traj:
        delta = rng.normal(size=params.input_dim)
        base = dynamics.odernn_flow(params, xs, I)
        moved = dynamics.odernn_flow(params, xs, I + delta)
        sens = max(sens, float(np.max(np.abs(moved - base))))
    c_norm = None if contrast is None else float(np.linalg.norm(external_coefficients_C(contrast)))
    return CausalityProbeReport(roundtrip, roundtrip <= 1e-5, sens, c_norm, horizon, dt)
