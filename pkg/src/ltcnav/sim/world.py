"""Procedural voxel worlds.

Voxel (i, j, k) is the 1 m cube centred on the point (i, j, k). Layer k = 0 is
ground, so a point's z coordinate is its altitude above the ground surface
(plus half a voxel).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ltcnav.errors import ConfigurationError

FREE, GROUND, TRUNK, CANOPY, WALL, ROOF, ROAD = range(7)

# base RGB per material id
PALETTE = np.array([
    [0, 0, 0],
    [88, 112, 66],
    [105, 78, 52],
    [48, 118, 48],
    [182, 172, 150],
    [78, 88, 110],
    [96, 96, 100],
], dtype=np.float64)


class EnvKind(str, Enum):
    FOREST = "Forest"
    NEIGHBORHOOD = "Neighborhood"


class Weather(str, Enum):
    CLEAR = "Clear"
    FOG = "Fog"
    LIGHT_RAIN = "LightRain"
    HEAVY_RAIN = "HeavyRain"


@dataclass(frozen=True)
class WorldConfig:
    kind: EnvKind = EnvKind.FOREST
    weather: Weather = Weather.CLEAR
    seed: int = 0
    size: tuple[int, int, int] = (96, 96, 40)

    def __post_init__(self):
        object.__setattr__(self, "kind", EnvKind(self.kind))
        object.__setattr__(self, "weather", Weather(self.weather))
        if min(self.size) < 8:
            raise ConfigurationError(f"world size {self.size} is too small")


@dataclass
class World:
    occ: np.ndarray          # uint8 material ids, (nx, ny, nz)
    config: WorldConfig

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.occ.shape

    @property
    def seed(self) -> int:
        return self.config.seed

    def in_bounds(self, p) -> bool:
        v = np.round(np.asarray(p, dtype=float)).astype(int)
        return bool(np.all(v >= 0) and np.all(v < np.array(self.occ.shape)))

    def occupied(self, key) -> bool:
        i, j, k = (int(v) for v in key)
        if not (0 <= i < self.occ.shape[0] and 0 <= j < self.occ.shape[1] and 0 <= k < self.occ.shape[2]):
            return True
        return bool(self.occ[i, j, k])

    def occupied_at(self, p) -> bool:
        return self.occupied(np.round(np.asarray(p, dtype=float)).astype(int))

    @classmethod
    def empty(cls, size=(40, 40, 20), ground: bool = False, seed: int = 0) -> "World":
        occ = np.zeros(size, dtype=np.uint8)
        if ground:
            occ[:, :, 0] = GROUND
        return cls(occ, WorldConfig(seed=seed, size=tuple(size)))


def _disc(cx: float, cy: float, r: float, nx: int, ny: int):
    i0, i1 = max(int(np.floor(cx - r)), 0), min(int(np.ceil(cx + r)) + 1, nx)
    j0, j1 = max(int(np.floor(cy - r)), 0), min(int(np.ceil(cy + r)) + 1, ny)
    ii, jj = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
    inside = (ii - cx) ** 2 + (jj - cy) ** 2 <= r * r
    return ii[inside], jj[inside]


def _forest(occ: np.ndarray, rng: np.random.Generator) -> None:
    nx, ny, nz = occ.shape
    n_trees = rng.poisson(nx * ny / 85)
    for _ in range(n_trees):
        cx, cy = rng.uniform(2, nx - 3), rng.uniform(2, ny - 3)
        r = rng.uniform(0.5, 1.1)
        h = int(rng.integers(8, min(26, nz - 4)))
        ii, jj = _disc(cx, cy, r, nx, ny)
        occ[ii, jj, 1:h + 1] = TRUNK
        # canopy: ellipsoid around the top of the trunk
        rh, rv = rng.uniform(1.8, 3.5), rng.uniform(1.5, 3.0)
        cz = h + rv * 0.3
        ii, jj = _disc(cx, cy, rh, nx, ny)
        for k in range(max(int(cz - rv), 2), min(int(cz + rv) + 1, nz - 1)):
            s = 1.0 - ((k - cz) / rv) ** 2
            if s <= 0:
                continue
            sel = (ii - cx) ** 2 + (jj - cy) ** 2 <= rh * rh * s
            cells = occ[ii[sel], jj[sel], k]
            occ[ii[sel], jj[sel], k] = np.where(cells == FREE, CANOPY, cells)


def _neighborhood(occ: np.ndarray, rng: np.random.Generator) -> None:
    nx, ny, nz = occ.shape
    period, street = 24, 8
    for bx in range(0, nx, period):
        occ[bx:bx + street, :, 0] = ROAD
    for by in range(0, ny, period):
        occ[:, by:by + street, 0] = ROAD
    for bx in range(street, nx, period):
        for by in range(street, ny, period):
            block = period - street
            for _ in range(int(rng.integers(1, 4))):
                w, d = int(rng.integers(5, 10)), int(rng.integers(5, 10))
                x0 = bx + int(rng.integers(0, max(block - w, 1)))
                y0 = by + int(rng.integers(0, max(block - d, 1)))
                tall = rng.random() < 0.3
                h = int(rng.integers(14, min(30, nz - 3))) if tall else int(rng.integers(4, 10))
                x1, y1 = min(x0 + w, nx - 1), min(y0 + d, ny - 1)
                occ[x0:x1, y0:y1, 1:h] = WALL
                occ[x0:x1, y0:y1, h] = ROOF
            if rng.random() < 0.5:  # a yard tree
                cx, cy = bx + rng.uniform(1, block - 1), by + rng.uniform(1, block - 1)
                ii, jj = _disc(cx, cy, 0.6, nx, ny)
                h = int(rng.integers(5, 9))
                free = occ[ii, jj, 1] == FREE
                occ[ii[free], jj[free], 1:h] = TRUNK
                ii, jj = _disc(cx, cy, 2.0, nx, ny)
                for k in range(h, min(h + 3, nz - 1)):
                    cells = occ[ii, jj, k]
                    occ[ii, jj, k] = np.where(cells == FREE, CANOPY, cells)


def generate_world(config: WorldConfig) -> World:
    """Deterministic world from ``config`` (the weather does not affect geometry)."""
    occ = np.zeros(config.size, dtype=np.uint8)
    occ[:, :, 0] = GROUND
    rng = np.random.default_rng([config.seed, 1 if config.kind is EnvKind.FOREST else 2])
    if config.kind is EnvKind.FOREST:
        _forest(occ, rng)
    else:
        _neighborhood(occ, rng)
    return World(occ, config)
