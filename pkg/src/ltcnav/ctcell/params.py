"""Parameter bundles for the recurrent cell architectures."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ltcnav.errors import ContractViolation


class CellKind(str, Enum):
    LTC = "LTC"
    CTRNN = "CTRNN"
    ODERNN = "ODERNN"
    CTGRU = "CTGRU"
    LSTM = "LSTM"

    @property
    def continuous(self) -> bool:
        return self in (CellKind.LTC, CellKind.CTRNN, CellKind.ODERNN)


# trainable tensor names per kind, in a fixed order (serialization relies on it)
TENSOR_NAMES: dict[CellKind, tuple[str, ...]] = {
    CellKind.LTC: ("tau", "A", "W_r", "W", "b"),
    CellKind.CTRNN: ("tau", "W_r", "W", "b"),
    CellKind.ODERNN: ("W_f", "b_f", "W_r", "W", "b"),
    CellKind.CTGRU: ("W_R", "U_R", "b_R", "W_S", "U_S", "b_S", "W_Q", "U_Q", "b_Q"),
    CellKind.LSTM: ("W", "U", "b"),
}

CTGRU_BANK = (0.05, 16.0, 6)  # min scale (s), max scale (s), count


def ctgru_log_bank(lo: float = CTGRU_BANK[0], hi: float = CTGRU_BANK[1],
                   count: int = CTGRU_BANK[2]) -> np.ndarray:
    return np.linspace(np.log(lo), np.log(hi), count)


@dataclass
class CellParams:
    """Trainable tensors of one recurrent cell plus its fixed structure.

    ``wiring_mask`` (D x D) and ``input_mask`` (D x m) are binary; when set,
    ``W_r`` and ``W`` are kept zero outside the mask. ``extra`` holds fixed,
    non-trainable data such as the CT-GRU log-timescale bank.
    """

    kind: CellKind
    state_dim: int
    input_dim: int
    tensors: dict[str, np.ndarray]
    wiring_mask: np.ndarray | None = None
    input_mask: np.ndarray | None = None
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def __getattr__(self, name):
        tensors = self.__dict__.get("tensors")
        if tensors is not None and name in tensors:
            return tensors[name]
        raise AttributeError(name)

    def copy(self) -> "CellParams":
        return CellParams(
            kind=self.kind,
            state_dim=self.state_dim,
            input_dim=self.input_dim,
            tensors={k: v.copy() for k, v in self.tensors.items()},
            wiring_mask=None if self.wiring_mask is None else self.wiring_mask.copy(),
            input_mask=None if self.input_mask is None else self.input_mask.copy(),
            extra={k: v.copy() for k, v in self.extra.items()},
        )

    def masks(self) -> dict[str, np.ndarray]:
        """Gradient masks keyed by tensor name (only for masked tensors)."""
        out = {}
        if self.wiring_mask is not None and "W_r" in self.tensors:
            out["W_r"] = self.wiring_mask
        if self.input_mask is not None and "W" in self.tensors:
            out["W"] = self.input_mask
        return out

    def trainable_count(self) -> int:
        masks = self.masks()
        total = 0
        for name, arr in self.tensors.items():
            total += int(masks[name].sum()) if name in masks else arr.size
        return total

    @property
    def bank_size(self) -> int:
        return len(self.extra["log_tau_bank"]) if self.kind is CellKind.CTGRU else 1

    @property
    def state_size(self) -> int:
        """Length of the flat state vector (may exceed ``state_dim``)."""
        if self.kind is CellKind.LSTM:
            return 2 * self.state_dim
        if self.kind is CellKind.CTGRU:
            return self.state_dim * self.bank_size
        return self.state_dim

    def validate(self) -> None:
        D, m = self.state_dim, self.input_dim
        if D < 1 or m < 1:
            raise ContractViolation(f"state_dim and input_dim must be positive, got {D}, {m}")
        expected = expected_shapes(self.kind, D, m)
        names = TENSOR_NAMES[self.kind]
        if set(self.tensors) != set(names):
            raise ContractViolation(f"{self.kind.value} expects tensors {names}, got {sorted(self.tensors)}")
        for name in names:
            if self.tensors[name].shape != expected[name]:
                raise ContractViolation(
                    f"{name} has shape {self.tensors[name].shape}, expected {expected[name]}")
            if not np.all(np.isfinite(self.tensors[name])):
                raise ContractViolation(f"{name} contains non-finite entries")
        if "tau" in self.tensors and np.any(self.tensors["tau"] <= 0):
            raise ContractViolation("all time constants must be strictly positive")
        for name, mask in self.masks().items():
            if mask.shape != self.tensors[name].shape:
                raise ContractViolation(f"mask for {name} has shape {mask.shape}")
            if np.any(self.tensors[name][mask == 0] != 0):
                raise ContractViolation(f"{name} has nonzero entries outside its wiring mask")


def expected_shapes(kind: CellKind, D: int, m: int) -> dict[str, tuple[int, ...]]:
    if kind is CellKind.LTC:
        return {"tau": (D,), "A": (D,), "W_r": (D, D), "W": (D, m), "b": (D,)}
    if kind is CellKind.CTRNN:
        return {"tau": (D,), "W_r": (D, D), "W": (D, m), "b": (D,)}
    if kind is CellKind.ODERNN:
        return {"W_f": (D, D), "b_f": (D,), "W_r": (D, D), "W": (D, m), "b": (D,)}
    if kind is CellKind.CTGRU:
        shapes = {}
        for g in "RSQ":
            shapes[f"W_{g}"] = (D, m)
            shapes[f"U_{g}"] = (D, D)
            shapes[f"b_{g}"] = (D,)
        return shapes
    if kind is CellKind.LSTM:
        return {"W": (4 * D, m), "U": (4 * D, D), "b": (4 * D,)}
    raise ContractViolation(f"unknown cell kind {kind}")


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def init_cell_params(kind: CellKind | str, state_dim: int, input_dim: int,
                     rng: np.random.Generator | int | None = None,
                     wiring_mask: np.ndarray | None = None,
                     input_mask: np.ndarray | None = None) -> CellParams:
    """Random initialization.

    tau ~ U[0.5, 2], A ~ U[-1, 1], weights ~ U(+-1/sqrt(fan_in)), biases zero
    (LSTM forget-gate bias starts at 1).
    """
    kind = CellKind(kind)
    rng = np.random.default_rng(rng)
    D, m = state_dim, input_dim
    shapes = expected_shapes(kind, D, m)
    t: dict[str, np.ndarray] = {}
    for name in TENSOR_NAMES[kind]:
        shape = shapes[name]
        if name == "tau":
            t[name] = rng.uniform(0.5, 2.0, size=shape)
        elif name == "A":
            t[name] = rng.uniform(-1.0, 1.0, size=shape)
        elif name.startswith("b"):
            t[name] = np.zeros(shape)
        elif name in ("W", "W_R", "W_S", "W_Q"):
            fan = m
            if name == "W" and input_mask is not None:
                fan = int(max(input_mask.sum(axis=1).max(), 1))
            t[name] = _uniform(rng, shape, fan)
        else:  # recurrent matrices
            fan = D
            if name == "W_r" and wiring_mask is not None:
                fan = int(max(wiring_mask.sum(axis=1).max(), 1))
            t[name] = _uniform(rng, shape, fan)
    if kind is CellKind.LSTM:
        t["b"][D:2 * D] = 1.0
    extra = {}
    if kind is CellKind.CTGRU:
        extra["log_tau_bank"] = ctgru_log_bank()
    params = CellParams(kind, D, m, t, wiring_mask=wiring_mask, input_mask=input_mask, extra=extra)
    for name, mask in params.masks().items():
        params.tensors[name] *= mask
    params.validate()
    return params


def zero_state(params: CellParams, batch: int | None = None) -> np.ndarray:
    if batch is None:
        return np.zeros(params.state_size)
    return np.zeros((batch, params.state_size))
