"""Voxel ray traversal (Amanatides-Woo) kernels for rendering, lidar and visibility."""
from __future__ import annotations

import numpy as np
from numba import njit

LIDAR_RANGE = 45.0
LIDAR_FAN = (32, 32)  # elevation x azimuth rays
GOLDEN = 0.6180339887498949


@njit(cache=True)
def traverse(occ, ox, oy, oz, dx, dy, dz, max_t):
    """First occupied voxel along the ray within ``max_t``.

    Returns (hit, i, j, k, t_entry, axis, t_exit) where ``axis`` is the axis of
    the face crossed on entry (-1 if the ray starts inside) and ``t_exit`` is
    the parameter where the ray leaves the grid when nothing is hit.
    """
    nx, ny, nz = occ.shape
    gx, gy, gz = ox + 0.5, oy + 0.5, oz + 0.5
    i, j, k = int(np.floor(gx)), int(np.floor(gy)), int(np.floor(gz))
    if i < 0 or j < 0 or k < 0 or i >= nx or j >= ny or k >= nz:
        return False, i, j, k, 0.0, -1, 0.0
    big = 1e30
    if dx > 0:
        sx, tmx, tdx = 1, (i + 1 - gx) / dx, 1.0 / dx
    elif dx < 0:
        sx, tmx, tdx = -1, (i - gx) / dx, -1.0 / dx
    else:
        sx, tmx, tdx = 0, big, big
    if dy > 0:
        sy, tmy, tdy = 1, (j + 1 - gy) / dy, 1.0 / dy
    elif dy < 0:
        sy, tmy, tdy = -1, (j - gy) / dy, -1.0 / dy
    else:
        sy, tmy, tdy = 0, big, big
    if dz > 0:
        sz, tmz, tdz = 1, (k + 1 - gz) / dz, 1.0 / dz
    elif dz < 0:
        sz, tmz, tdz = -1, (k - gz) / dz, -1.0 / dz
    else:
        sz, tmz, tdz = 0, big, big
    t, axis = 0.0, -1
    while True:
        if occ[i, j, k] != 0:
            return True, i, j, k, t, axis, t
        if tmx <= tmy and tmx <= tmz:
            t, axis = tmx, 0
            i += sx
            tmx += tdx
        elif tmy <= tmz:
            t, axis = tmy, 1
            j += sy
            tmy += tdy
        else:
            t, axis = tmz, 2
            k += sz
            tmz += tdz
        if t > max_t:
            return False, i, j, k, t, axis, max_t
        if i < 0 or j < 0 or k < 0 or i >= nx or j >= ny or k >= nz:
            return False, i, j, k, t, axis, t


@njit(cache=True)
def _box_hit(ox, oy, oz, dx, dy, dz, cx, cy, cz, h):
    """Slab test against the axis-aligned cube of half-size h; returns (t, axis) or (-1, -1)."""
    t0, t1, ax = -1e30, 1e30, -1
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    c = (cx, cy, cz)
    for a in range(3):
        lo, hi = c[a] - h, c[a] + h
        if d[a] == 0.0:
            if o[a] < lo or o[a] > hi:
                return -1.0, -1
            continue
        ta, tb = (lo - o[a]) / d[a], (hi - o[a]) / d[a]
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0, ax = ta, a
        if tb < t1:
            t1 = tb
        if t0 > t1:
            return -1.0, -1
    if t1 < 0:
        return -1.0, -1
    return max(t0, 0.0), ax


@njit(cache=True)
def _hash01(i, j, k):
    h = (i * 73856093) ^ (j * 19349663) ^ (k * 83492791)
    return (h & 1023) / 1023.0


@njit(cache=True)
def render_kernel(occ, palette, origin, dirs, targets, target_half, max_t, rgb, depth, tmask):
    """Shade every ray in ``dirs`` (H, W, 3 unit vectors) into rgb/depth/target mask."""
    H, W = dirs.shape[0], dirs.shape[1]
    ox, oy, oz = origin[0], origin[1], origin[2]
    face_shade = (0.78, 0.64, 1.0)
    for r in range(H):
        for c in range(W):
            dx, dy, dz = dirs[r, c, 0], dirs[r, c, 1], dirs[r, c, 2]
            hit, i, j, k, t, axis, t_exit = traverse(occ, ox, oy, oz, dx, dy, dz, max_t)
            best_t = 1e30
            col0, col1, col2 = 0.0, 0.0, 0.0
            if hit:
                best_t = t
                m = occ[i, j, k]
                s = 0.85 + 0.3 * _hash01(i, j, k)
                if axis >= 0:
                    s *= face_shade[axis]
                col0, col1, col2 = palette[m, 0] * s, palette[m, 1] * s, palette[m, 2] * s
            tgt = False
            for n in range(targets.shape[0]):
                tt, ax = _box_hit(ox, oy, oz, dx, dy, dz, targets[n, 0], targets[n, 1], targets[n, 2], target_half)
                if tt >= 0.0 and tt < best_t:
                    best_t = tt
                    s = face_shade[ax] if ax >= 0 else 1.0
                    col0, col1, col2 = 225.0 * s, 28.0 * s, 28.0 * s
                    tgt = True
            if best_t >= 1e29:
                # left the grid: distant ground plane below the horizon, sky above
                if dz < 0:
                    tg = (0.5 - oz) / dz
                    best_t = tg
                    col0, col1, col2 = 98.0, 116.0, 80.0
                else:
                    e = min(dz, 1.0)
                    col0, col1, col2 = 150.0 - 60.0 * e, 185.0 - 50.0 * e, 235.0 - 15.0 * e
                    best_t = np.inf
            rgb[r, c, 0], rgb[r, c, 1], rgb[r, c, 2] = col0, col1, col2
            depth[r, c] = best_t
            tmask[r, c] = tgt


@njit(cache=True)
def lidar_kernel(occ, origin, dirs, max_t, out):
    """First hit per ray within range; out[n] = (i, j, k) or (-1, -1, -1)."""
    n_hit = 0
    for n in range(dirs.shape[0]):
        hit, i, j, k, t, axis, _ = traverse(occ, origin[0], origin[1], origin[2],
                                            dirs[n, 0], dirs[n, 1], dirs[n, 2], max_t)
        if hit and t <= max_t:
            out[n, 0], out[n, 1], out[n, 2] = i, j, k
            n_hit += 1
        else:
            out[n, 0], out[n, 1], out[n, 2] = -1, -1, -1
    return n_hit


@njit(cache=True)
def segment_clear(occ, a, b):
    """True when no occupied voxel lies strictly between points a and b.

    The voxels containing the two endpoints are ignored.
    """
    dx, dy, dz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    L = np.sqrt(dx * dx + dy * dy + dz * dz)
    if L == 0.0:
        return True
    dx, dy, dz = dx / L, dy / L, dz / L
    ei, ej, ek = int(np.floor(b[0] + 0.5)), int(np.floor(b[1] + 0.5)), int(np.floor(b[2] + 0.5))
    si, sj, sk = int(np.floor(a[0] + 0.5)), int(np.floor(a[1] + 0.5)), int(np.floor(a[2] + 0.5))
    nx, ny, nz = occ.shape
    gx, gy, gz = a[0] + 0.5, a[1] + 0.5, a[2] + 0.5
    i, j, k = si, sj, sk
    big = 1e30
    sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
    sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
    sz = 1 if dz > 0 else (-1 if dz < 0 else 0)
    tmx = ((i + 1 - gx) / dx if dx > 0 else ((i - gx) / dx if dx < 0 else big))
    tmy = ((j + 1 - gy) / dy if dy > 0 else ((j - gy) / dy if dy < 0 else big))
    tmz = ((k + 1 - gz) / dz if dz > 0 else ((k - gz) / dz if dz < 0 else big))
    tdx = abs(1.0 / dx) if dx != 0 else big
    tdy = abs(1.0 / dy) if dy != 0 else big
    tdz = abs(1.0 / dz) if dz != 0 else big
    while True:
        if i == ei and j == ej and k == ek:
            return True
        inside = 0 <= i < nx and 0 <= j < ny and 0 <= k < nz
        if inside and not (i == si and j == sj and k == sk) and occ[i, j, k] != 0:
            return False
        if tmx <= tmy and tmx <= tmz:
            t = tmx
            i += sx
            tmx += tdx
        elif tmy <= tmz:
            t = tmy
            j += sy
            tmy += tdy
        else:
            t = tmz
            k += sz
            tmz += tdz
        if t > L + 1e-9:
            return True


def lidar_directions(scan_index: int = 0) -> np.ndarray:
    """32 x 32 full-sphere fan, rotated by golden-ratio offsets from scan to scan."""
    ne, na = LIDAR_FAN
    off_e = (scan_index * GOLDEN) % 1.0
    off_a = (scan_index * GOLDEN * GOLDEN) % 1.0
    u = (np.arange(ne) + off_e) / ne          # uniform in cos-latitude -> even sphere coverage
    el = np.arcsin(2.0 * u - 1.0)
    az = 2 * np.pi * (np.arange(na) + off_a) / na
    E, A = np.meshgrid(el, az, indexing="ij")
    return np.stack([np.cos(E) * np.cos(A), np.cos(E) * np.sin(A), np.sin(E)], -1).reshape(-1, 3)


def lidar_scan(world, position, scan_index: int = 0, max_range: float = LIDAR_RANGE) -> set:
    """Voxel keys of the first occupied voxel hit by each ray within ``max_range``."""
    occ = world.occ if hasattr(world, "occ") else world
    dirs = lidar_directions(scan_index)
    out = np.empty((dirs.shape[0], 3), dtype=np.int64)
    lidar_kernel(occ, np.asarray(position, dtype=float), dirs, float(max_range), out)
    hits = out[out[:, 0] >= 0]
    return set(map(tuple, hits.tolist()))


def line_of_sight(occ: np.ndarray, a, b) -> bool:
    return bool(segment_clear(occ, np.asarray(a, dtype=float), np.asarray(b, dtype=float)))
