"""Instantiate any architecture under a shared parameter budget."""
from __future__ import annotations

import numpy as np

from ltcnav.ctcell.params import CellKind, CellParams, init_cell_params
from ltcnav.ctcell.wiring import NcpWiring, cell_masks
from ltcnav.errors import ConfigurationError

ARCHITECTURES = ("NCP", "LTC", "CTRNN", "ODERNN", "CTGRU", "LSTM")
DEFAULT_NEURONS = 32


def cell_param_count(kind: CellKind | str, D: int, m: int) -> int:
    kind = CellKind(kind)
    if kind is CellKind.LTC:
        return D * D + D * m + 3 * D
    if kind is CellKind.CTRNN:
        return D * D + D * m + 2 * D
    if kind is CellKind.ODERNN:
        return 2 * D * D + D * m + 2 * D
    if kind is CellKind.CTGRU:
        return 3 * (D * D + D * m + D)
    if kind is CellKind.LSTM:
        return 4 * (D * D + D * m + D)
    raise ConfigurationError(kind)


def matched_state_dim(kind: CellKind | str, input_dim: int, neurons: int = DEFAULT_NEURONS) -> int:
    """State size whose parameter count is closest to a dense LTC of ``neurons`` cells."""
    target = cell_param_count(CellKind.LTC, neurons, input_dim)
    sizes = np.arange(1, 4 * neurons + 1)
    counts = np.array([cell_param_count(kind, int(d), input_dim) for d in sizes])
    return int(sizes[np.argmin(np.abs(counts - target))])


def build_cell(arch: str, input_dim: int, neurons: int = DEFAULT_NEURONS,
               rng: np.random.Generator | int | None = None,
               wiring: NcpWiring | None = None) -> tuple[CellParams, np.ndarray]:
    """Return ``(params, motor_index)`` for a named architecture.

    ``motor_index`` selects the state entries the readout sees: the motor
    neurons for NCP, all outputs otherwise. Non-LTC kinds get the state
    size that matches the dense-LTC parameter budget for ``neurons`` cells.
    """
    arch = arch.upper().replace("-", "")
    if arch not in ARCHITECTURES:
        raise ConfigurationError(f"unknown architecture {arch!r}; choose from {ARCHITECTURES}")
    rng = np.random.default_rng(rng)
    if arch == "NCP":
        wiring = wiring or NcpWiring(sensory=input_dim)
        if wiring.sensory != input_dim:
            raise ConfigurationError(f"wiring sensory={wiring.sensory} but input_dim={input_dim}")
        rec, inp = cell_masks(wiring)
        params = init_cell_params(CellKind.LTC, wiring.neurons, input_dim, rng,
                                  wiring_mask=rec, input_mask=inp)
        motor = np.arange(wiring.inter + wiring.command, wiring.neurons)
        return params, motor
    kind = CellKind(arch)
    if kind in (CellKind.LTC, CellKind.CTRNN):
        D = neurons
    else:
        D = matched_state_dim(kind, input_dim, neurons)
    params = init_cell_params(kind, D, input_dim, rng)
    return params, np.arange(D)
