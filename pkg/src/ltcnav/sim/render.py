"""Pinhole camera, voxel renderer and synthetic weather."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ltcnav.sim.raycast import render_kernel
from ltcnav.sim.world import PALETTE, Weather

IMAGE_HW = (64, 64)
HFOV = np.pi / 2
TARGET_HALF = 0.55         # slightly over a voxel so a marker on a surface voxel wins depth ties
MAX_RENDER_DEPTH = 120.0
FOG_SCALE = 18.0           # metres; blend weight 1 - exp(-depth / FOG_SCALE)
FOG_GRAY = np.array([178.0, 180.0, 184.0])


@dataclass
class Camera:
    hw: tuple[int, int] = IMAGE_HW
    hfov: float = HFOV

    @property
    def focal(self) -> float:
        return 0.5 * self.hw[1] / np.tan(0.5 * self.hfov)

    def body_rays(self) -> np.ndarray:
        """(H, W, 3) unit directions in the body frame (forward, left, up)."""
        H, W = self.hw
        f = self.focal
        c = (np.arange(W) + 0.5 - 0.5 * W) / f
        r = (np.arange(H) + 0.5 - 0.5 * H) / f
        R, C = np.meshgrid(r, c, indexing="ij")
        d = np.stack([np.ones_like(R), -C, -R], -1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def project(self, p_body) -> tuple[float, float] | None:
        """Body-frame point -> (row, col) in continuous pixel units, None if behind."""
        x, y, z = p_body
        if x <= 0:
            return None
        f = self.focal
        return 0.5 * self.hw[0] - f * z / x, 0.5 * self.hw[1] - f * y / x

    def in_frustum(self, p_body) -> bool:
        x, y, z = p_body
        t = np.tan(0.5 * self.hfov)
        vt = t * self.hw[0] / self.hw[1]
        return x > 0 and abs(y) <= t * x and abs(z) <= vt * x


def yaw_matrix(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def world_to_body(v, yaw: float) -> np.ndarray:
    return yaw_matrix(yaw).T @ np.asarray(v, dtype=float)


def body_to_world(v, yaw: float) -> np.ndarray:
    return yaw_matrix(yaw) @ np.asarray(v, dtype=float)


def yaw_towards(position, target) -> float:
    d = np.asarray(target, dtype=float) - np.asarray(position, dtype=float)
    return float(np.arctan2(d[1], d[0]))


@dataclass
class Frame:
    image: np.ndarray        # uint8 (H, W, 3)
    depth: np.ndarray        # metres, inf for sky
    target_mask: np.ndarray  # pixels showing a target cube

    def target_box(self, pad: int = 1):
        """(row0, col0, row1, col1) around visible target pixels, or None."""
        rows, cols = np.nonzero(self.target_mask)
        if rows.size == 0:
            return None
        H, W = self.target_mask.shape
        return (max(rows.min() - pad, 0), max(cols.min() - pad, 0),
                min(rows.max() + 1 + pad, H), min(cols.max() + 1 + pad, W))


def _weather_rng(world_seed: int, frame_index: int, weather: Weather) -> np.random.Generator:
    tag = {Weather.CLEAR: 0, Weather.FOG: 1, Weather.LIGHT_RAIN: 2, Weather.HEAVY_RAIN: 3}[weather]
    return np.random.default_rng([int(world_seed), int(frame_index), tag, 7919])


def fog(rgb: np.ndarray, depth: np.ndarray, scale: float = FOG_SCALE) -> np.ndarray:
    w = 1.0 - np.exp(-np.minimum(depth, 1e6) / scale)
    return rgb * (1 - w[..., None]) + FOG_GRAY * w[..., None]


def rain(rgb: np.ndarray, rng: np.random.Generator, streaks: int, noise: float) -> np.ndarray:
    """Seeded slanted streak occlusions plus additive Gaussian noise."""
    out = rgb.copy()
    H, W = rgb.shape[:2]
    for _ in range(streaks):
        r, c = rng.integers(0, H), rng.integers(0, W)
        length = int(rng.integers(3, 9))
        for n in range(length):
            rr, cc = r + n, c - n // 3
            if 0 <= rr < H and 0 <= cc < W:
                out[rr, cc] = 0.45 * out[rr, cc] + 0.55 * np.array([205.0, 210.0, 220.0])
    out += rng.normal(0.0, noise, size=out.shape)
    return out


def apply_weather(rgb: np.ndarray, depth: np.ndarray, weather: Weather, world_seed: int,
                  frame_index: int) -> np.ndarray:
    weather = Weather(weather)
    if weather is Weather.CLEAR:
        return rgb
    if weather is Weather.FOG:
        return fog(rgb, depth)
    rng = _weather_rng(world_seed, frame_index, weather)
    if weather is Weather.LIGHT_RAIN:
        return rain(rgb, rng, streaks=40, noise=6.0)
    return rain(fog(rgb, depth, scale=45.0), rng, streaks=160, noise=14.0)


_RAY_CACHE: dict = {}


def render(world, position, yaw: float, targets=(), weather: Weather = Weather.CLEAR,
           frame_index: int = 0, camera: Camera | None = None) -> Frame:
    """Render the view from ``position`` looking along ``yaw`` (level camera)."""
    camera = camera or Camera()
    key = (camera.hw, camera.hfov)
    if key not in _RAY_CACHE:
        _RAY_CACHE[key] = camera.body_rays()
    rays = _RAY_CACHE[key] @ yaw_matrix(yaw).T
    H, W = camera.hw
    rgb = np.empty((H, W, 3))
    depth = np.empty((H, W))
    tmask = np.zeros((H, W), dtype=np.bool_)
    tg = np.asarray(targets, dtype=float).reshape(-1, 3)
    render_kernel(world.occ, PALETTE, np.asarray(position, dtype=float), np.ascontiguousarray(rays),
                  tg, TARGET_HALF, MAX_RENDER_DEPTH, rgb, depth, tmask)
    rgb = apply_weather(rgb, depth, weather, world.seed, frame_index)
    return Frame(np.clip(np.round(rgb), 0, 255).astype(np.uint8), depth, tmask)


def rms_contrast(image: np.ndarray) -> float:
    gray = image.astype(float).mean(axis=-1)
    return float(gray.std())
