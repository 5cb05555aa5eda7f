"""Closed-form intervention coefficients of the LTC right-hand side.

For F(x, I) = -(1/tau + f) x + f A with f = tanh(W_r x + W I + b):
  A_int = dF/dx,  C = dF/dI at x = 0,  B = d2F/(dx dI).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ltcnav.ctcell.dynamics import synaptic_drive
from ltcnav.ctcell.params import CellKind, CellParams
from ltcnav.errors import ContractViolation, UnsupportedArchitecture


def _require_ltc(params: CellParams) -> None:
    if params.kind is not CellKind.LTC:
        raise UnsupportedArchitecture(f"intervention coefficients are defined for LTC, not {params.kind.value}")


def _point(params: CellParams, x, I):
    x = np.zeros(params.state_dim) if x is None else np.asarray(x, dtype=float)
    I = np.zeros(params.input_dim) if I is None else np.asarray(I, dtype=float)
    if x.shape != (params.state_dim,) or I.shape != (params.input_dim,):
        raise ContractViolation(f"x {x.shape} / I {I.shape} do not match D={params.state_dim}, m={params.input_dim}")
    return x, I


def ltc_jacobian_x(params: CellParams, x=None, I=None) -> np.ndarray:
    """(i, j) -> -delta_ij (1/tau_i + f_i) + (A_i - x_i)(1 - f_i^2) W_r[i, j]."""
    _require_ltc(params)
    x, I = _point(params, x, I)
    f = np.tanh(synaptic_drive(params, x, I))
    return -np.diag(1.0 / params.tau + f) + ((params.A - x) * (1.0 - f * f))[:, None] * params.W_r


def external_coefficients_C(params: CellParams, I=None) -> np.ndarray:
    """(i, k) -> W[i, k](1 - f_i^2) A_i with f evaluated at x = 0 and probe input I (default 0)."""
    _require_ltc(params)
    x, I = _point(params, None, I)
    f = np.tanh(synaptic_drive(params, x, I))
    return params.W * ((1.0 - f * f) * params.A)[:, None]


def internal_coefficients_B(params: CellParams, x=None, I=None) -> np.ndarray:
    """(i, j, k) -> W[i, k](f_i^2 - 1)(2 W_r[i, j] f_i (A_i - x_i) + delta_ij)."""
    _require_ltc(params)
    x, I = _point(params, x, I)
    D = params.state_dim
    f = np.tanh(synaptic_drive(params, x, I))
    bracket = 2.0 * params.W_r * (f * (params.A - x))[:, None] + np.eye(D)
    return (f * f - 1.0)[:, None, None] * bracket[:, :, None] * params.W[:, None, :]


@dataclass
class InterventionCoefficients:
    A_int: np.ndarray  # D x D, at (x, I = 0)
    B_int: np.ndarray  # D x D x m, at (x, I)
    C_int: np.ndarray  # D x m, at (0, I)
    x: np.ndarray
    I: np.ndarray

    def __post_init__(self):
        D, m = self.C_int.shape
        if self.A_int.shape != (D, D) or self.B_int.shape != (D, D, m):
            raise ContractViolation("coefficient shapes are inconsistent")
        if not all(np.all(np.isfinite(a)) for a in (self.A_int, self.B_int, self.C_int)):
            raise ContractViolation("coefficients must be finite")


def intervention_coefficients(params: CellParams, x=None, I=None) -> InterventionCoefficients:
    """All three coefficient sets at one evaluation point (defaults: the origin)."""
    x, I = _point(params, x, I)
    return InterventionCoefficients(
        ltc_jacobian_x(params, x, np.zeros_like(I)),
        internal_coefficients_B(params, x, I),
        external_coefficients_C(params, I),
        x, I)
