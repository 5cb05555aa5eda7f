"""Greedy best-first voxel path search."""
from __future__ import annotations

import heapq
import itertools
from typing import Callable

import numpy as np

from ltcnav.errors import ContractViolation

NEIGHBORS = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]
MAX_EXPANSIONS = 200_000


def _sub_steps(d):
    """Axis-aligned intermediate offsets a diagonal move sweeps past (no corner cutting)."""
    out = []
    for e in itertools.product(*[(0, v) if v else (0,) for v in d]):
        if e != (0, 0, 0) and e != tuple(d):
            out.append(e)
    return out


SUB_STEPS = {d: _sub_steps(d) for d in NEIGHBORS}


def greedy_plan(blocked: np.ndarray, start, goal,
                admissible: Callable[[tuple], bool] | None = None,
                min_z: int = 0, max_expansions: int = MAX_EXPANSIONS) -> list[tuple] | None:
    """Best-first search ordered purely by Euclidean distance to ``goal``.

    ``blocked`` is a boolean grid; the start and goal voxels are exempt from
    it and from ``admissible``. Moves are 26-connected and may not cut past
    blocked voxels. Returns the voxel sequence from start to goal, or None
    when the frontier is exhausted.
    """
    start = tuple(int(v) for v in start)
    goal = tuple(int(v) for v in goal)
    if start == goal:
        raise ContractViolation("start and goal must differ")
    shape = blocked.shape
    g = np.array(goal, dtype=float)

    def inside(v):
        return 0 <= v[0] < shape[0] and 0 <= v[1] < shape[1] and min_z <= v[2] < shape[2]

    if not inside(goal):
        return None

    def free(v):
        if v == goal or v == start:
            return inside(v)
        return inside(v) and not blocked[v] and (admissible is None or admissible(v))

    def passable(v):
        return v == start or v == goal or (inside(v) and not blocked[v])

    counter = itertools.count()
    frontier = [(float(np.linalg.norm(np.array(start) - g)), next(counter), start)]
    parent = {start: None}
    expansions = 0
    while frontier:
        _, _, v = heapq.heappop(frontier)
        if v == goal:
            path = []
            while v is not None:
                path.append(v)
                v = parent[v]
            return path[::-1]
        expansions += 1
        if expansions > max_expansions:
            return None
        for d in NEIGHBORS:
            n = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
            if n in parent or not free(n):
                continue
            if any(not passable((v[0] + e[0], v[1] + e[1], v[2] + e[2])) for e in SUB_STEPS[d]):
                continue
            parent[n] = v
            h = (n[0] - g[0]) ** 2 + (n[1] - g[1]) ** 2 + (n[2] - g[2]) ** 2
            heapq.heappush(frontier, (h ** 0.5, next(counter), n))
    return None


def dilate(grid: np.ndarray, radius: int = 1) -> np.ndarray:
    """Chebyshev-ball dilation, done as one separable pass per axis."""
    if radius <= 0:
        return grid
    out = grid.copy()
    for axis in range(3):
        src = out.copy()
        n = src.shape[axis]
        for r in range(1, radius + 1):
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis], hi[axis] = slice(0, n - r), slice(r, n)
            out[tuple(lo)] |= src[tuple(hi)]
            out[tuple(hi)] |= src[tuple(lo)]
    return out


def plan_with_fallback(known: np.ndarray, start, goal, admissible=None, margin: int = 1,
                       min_z: int = 1) -> list[tuple] | None:
    """Try a safety-margin grid with the visibility filter, then relax step by step.

    Order: dilated + filter, dilated, raw + filter, raw.
    """
    grids = [known]
    if margin > 0:
        wide = dilate(known, margin)
        # near the endpoints the margin would seal the start or goal in; use raw occupancy there
        for v in (start, goal):
            box = tuple(slice(max(int(c) - margin, 0), int(c) + margin + 1) for c in v)
            wide[box] = known[box]
        grids.insert(0, wide)
    for grid in grids:
        for filt in ([admissible, None] if admissible is not None else [None]):
            path = greedy_plan(grid, start, goal, filt, min_z=min_z)
            if path is not None:
                return path
    return None


def path_is_valid(path, occupied: Callable[[tuple], bool]) -> bool:
    """Every voxel unoccupied and consecutive voxels 26-adjacent."""
    if not path:
        return False
    for a, b in zip(path, path[1:]):
        if max(abs(a[i] - b[i]) for i in range(3)) != 1:
            return False
    return not any(occupied(v) for v in path)
