"""Sparse sensory -> inter -> command -> motor wiring for NCP-style LTC cells."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ltcnav.errors import ConfigurationError


@dataclass(frozen=True)
class NcpWiring:
    sensory: int
    inter: int = 12
    command: int = 8
    motor: int = 3
    sensory_fanout: int = 4
    inter_fanout: int = 4
    motor_fanin: int = 4
    recurrent_command: int = 4
    seed: int = 0

    @property
    def sizes(self) -> tuple[int, int, int, int]:
        return (self.sensory, self.inter, self.command, self.motor)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def neurons(self) -> int:
        """Number of non-sensory (stateful) neurons."""
        return self.inter + self.command + self.motor

    def layer_slices(self) -> dict[str, slice]:
        s, i, c, m = self.sizes
        return {
            "sensory": slice(0, s),
            "inter": slice(s, s + i),
            "command": slice(s + i, s + i + c),
            "motor": slice(s + i + c, s + i + c + m),
        }


def build_ncp_mask(wiring: NcpWiring) -> np.ndarray:
    """Binary adjacency over all neurons; entry [target, source] = 1 if a synapse exists.

    Deterministic for a fixed seed. Every inter/command/motor neuron ends up
    with at least one incoming synapse from the previous layer, so all
    neurons are reachable from the sensory layer.
    """
    if min(wiring.sizes) < 1:
        raise ConfigurationError(f"layer sizes must be positive, got {wiring.sizes}")
    checks = [
        ("sensory_fanout", wiring.sensory_fanout, wiring.inter),
        ("inter_fanout", wiring.inter_fanout, wiring.command),
        ("motor_fanin", wiring.motor_fanin, wiring.command),
        ("recurrent_command", wiring.recurrent_command, wiring.command),
    ]
    for name, value, limit in checks:
        if value < 0 or value > limit:
            raise ConfigurationError(f"{name}={value} is infeasible for a target layer of {limit}")

    rng = np.random.default_rng(wiring.seed)
    sl = wiring.layer_slices()
    idx = {k: np.arange(v.start, v.stop) for k, v in sl.items()}
    mask = np.zeros((wiring.total, wiring.total), dtype=np.int8)

    def fan_out(src_layer, dst_layer, k):
        for src in idx[src_layer]:
            for dst in rng.choice(idx[dst_layer], size=k, replace=False):
                mask[dst, src] = 1
        # guarantee a predecessor for every target
        for dst in idx[dst_layer]:
            if not mask[dst, idx[src_layer]].any():
                mask[dst, rng.choice(idx[src_layer])] = 1

    fan_out("sensory", "inter", wiring.sensory_fanout)
    fan_out("inter", "command", wiring.inter_fanout)
    for dst in idx["motor"]:
        for src in rng.choice(idx["command"], size=wiring.motor_fanin, replace=False):
            mask[dst, src] = 1
        if not mask[dst, idx["command"]].any():
            mask[dst, rng.choice(idx["command"])] = 1
    for dst in idx["command"]:
        for src in rng.choice(idx["command"], size=wiring.recurrent_command, replace=False):
            mask[dst, src] = 1
    return mask


def reachable_from_sensory(mask: np.ndarray, sensory: int) -> np.ndarray:
    """Boolean vector: neuron reachable from any sensory neuron (BFS)."""
    n = mask.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[:sensory] = True
    queue = deque(range(sensory))
    while queue:
        src = queue.popleft()
        for dst in np.flatnonzero(mask[:, src]):
            if not seen[dst]:
                seen[dst] = True
                queue.append(dst)
    return seen


def cell_masks(wiring: NcpWiring, mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Split the full adjacency into (recurrent D x D, input D x m) masks."""
    if mask is None:
        mask = build_ncp_mask(wiring)
    s = wiring.sensory
    return mask[s:, s:].astype(float), mask[s:, :s].astype(float)
