"""Task generators: drone spawn, static targets, chase paths and hiking blazes."""
from __future__ import annotations

import numpy as np

from ltcnav.errors import ContractViolation
from ltcnav.sim.planner import NEIGHBORS
from ltcnav.sim.raycast import line_of_sight
from ltcnav.sim.render import Camera, world_to_body
from ltcnav.sim.spline import SplinePath, fit_spline

TARGET_RANGE = 25.0
TARGET_MIN_DIST = 10.0
SPAWN_ALTITUDE = (2, 6)
CHASE_LENGTH = (20.0, 30.0)
CHASE_ALTITUDE = (2, 9)
CHASE_MOMENTUM = 0.7
BLAZE_ALTITUDE = (10, 30)
BLAZE_SEPARATION = 10.0


class SpawnFailure(RuntimeError):
    pass


class GenerationFailure(RuntimeError):
    pass


def _clearance(world, v, r: int = 1) -> bool:
    i, j, k = v
    nx, ny, nz = world.shape
    if not (r <= i < nx - r and r <= j < ny - r and r <= k < nz - r):
        return False
    return not world.occ[i - r:i + r + 1, j - r:j + r + 1, k - r:k + r + 1].any()


def spawn_drone(world, rng: np.random.Generator, altitude=SPAWN_ALTITUDE, retries: int = 2000):
    """Random free voxel with one voxel of clearance; returns (position, yaw)."""
    nx, ny, _ = world.shape
    for _ in range(retries):
        v = (int(rng.integers(3, nx - 3)), int(rng.integers(3, ny - 3)),
             int(rng.integers(altitude[0], altitude[1] + 1)))
        if _clearance(world, v, 2):
            return np.array(v, dtype=float), float(rng.uniform(-np.pi, np.pi))
    raise SpawnFailure("no free spawn voxel found")


def static_target_ok(world, position, yaw, v, camera: Camera | None = None,
                     max_dist: float = TARGET_RANGE, min_dist: float = TARGET_MIN_DIST) -> bool:
    """All spawn predicates: free voxel, distance band, inside the frustum, clear line of sight."""
    camera = camera or Camera()
    v = np.asarray(v, dtype=float)
    if world.occupied(v.astype(int)) or v[2] < 1:
        return False
    d = np.linalg.norm(v - position)
    if not (min_dist <= d < max_dist):
        return False
    if not camera.in_frustum(world_to_body(v - position, yaw)):
        return False
    return line_of_sight(world.occ, position, v)


def spawn_static_target(world, position, yaw, rng: np.random.Generator, retries: int = 500,
                        camera: Camera | None = None, min_dist: float = TARGET_MIN_DIST):
    """Rejection-sample a target voxel visible from the pose."""
    camera = camera or Camera()
    half = 0.5 * camera.hfov
    for _ in range(retries):
        az = yaw + rng.uniform(-half, half)
        el = rng.uniform(-half, half) * 0.5
        dist = rng.uniform(min_dist, TARGET_RANGE)
        p = position + dist * np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
        v = np.round(p)
        if not world.in_bounds(v):
            continue
        if static_target_ok(world, position, yaw, v, camera, min_dist=min_dist):
            return tuple(int(x) for x in v)
    raise SpawnFailure(f"no visible target found after {retries} tries")


def chase_walk(world, start, rng: np.random.Generator, momentum: float = CHASE_MOMENTUM,
               length=CHASE_LENGTH, altitude=CHASE_ALTITUDE, max_steps: int = 400):
    """One momentum-biased random walk; returns its voxel list or None when boxed in."""
    v = tuple(int(x) for x in np.round(start))
    visited = {v}
    path = [v]
    direction = rng.normal(size=3)
    direction[2] *= 0.2
    direction /= np.linalg.norm(direction)
    # the last diagonal step may add up to sqrt(3) m past the target
    target_len = rng.uniform(length[0], length[1] - np.sqrt(3.0))
    total = 0.0
    for _ in range(max_steps):
        if total >= target_len:
            return path
        rand = rng.normal(size=3)
        rand[2] *= 0.3
        rand /= np.linalg.norm(rand)
        want = momentum * direction + (1 - momentum) * rand
        want /= np.linalg.norm(want)
        best, best_score = None, -np.inf
        for d in NEIGHBORS:
            n = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
            if n in visited or not (altitude[0] <= n[2] <= altitude[1]) or not _clearance(world, n, 1):
                continue
            dv = np.array(d, dtype=float)
            score = float(dv @ want) / np.linalg.norm(dv)
            if score > best_score:
                best, best_score = n, score
        if best is None:
            return None
        step = np.array(best) - np.array(v)
        direction = step / np.linalg.norm(step)
        total += float(np.linalg.norm(step))
        v = best
        visited.add(v)
        path.append(v)
    return None


def chase_path(world, position, rng: np.random.Generator, max_attempts: int = 10,
               momentum: float = CHASE_MOMENTUM) -> tuple[SplinePath, list]:
    """Spline through a random walk of 20-30 m starting at the drone; retries on failure."""
    for _ in range(max_attempts):
        walk = chase_walk(world, position, rng, momentum)
        if walk is None or len(walk) < 20:
            continue
        spline = fit_spline(walk)
        if CHASE_LENGTH[0] <= spline.length <= CHASE_LENGTH[1]:
            return spline, walk
    raise GenerationFailure(f"chase path generation failed {max_attempts} times")


def surface_voxels(world) -> np.ndarray:
    """Occupied voxels (above the ground layer) with at least one free face neighbour."""
    occ = world.occ != 0
    free_nb = np.zeros_like(occ)
    for axis in range(3):
        for shift in (1, -1):
            rolled = np.roll(~occ, shift, axis=axis)
            edge = [slice(None)] * 3
            edge[axis] = 0 if shift == 1 else -1
            rolled[tuple(edge)] = False
            free_nb |= rolled
    surf = occ & free_nb
    surf[:, :, 0] = False
    return np.argwhere(surf)


def half_space_ok(v, p, prev) -> bool:
    """Candidate lies beyond the previous blaze as seen from the drone."""
    v, p, prev = (np.asarray(a, dtype=float) for a in (v, p, prev))
    d = prev - p
    return float((v - p) @ d) > float(d @ d)


def get_blazes(world, position, count: int = 3, altitude=BLAZE_ALTITUDE,
               separation: float = BLAZE_SEPARATION, candidates: np.ndarray | None = None) -> list[tuple]:
    """Scan surface voxels nearest-first and accept the first that satisfies every rule.

    Rules: altitude band, at least ``separation`` from every earlier blaze, and
    the half-space test relative to the previous blaze.
    """
    p = np.asarray(position, dtype=float)
    cand = surface_voxels(world) if candidates is None else np.asarray(candidates)
    cand = cand[(cand[:, 2] > altitude[0]) & (cand[:, 2] < altitude[1])]
    order = np.lexsort((cand[:, 2], cand[:, 1], cand[:, 0], np.linalg.norm(cand - p, axis=1)))
    cand = cand[order]
    blazes: list[tuple] = []
    for _ in range(count):
        chosen = None
        for v in cand:
            t = tuple(int(x) for x in v)
            if t in blazes:
                continue
            if any(np.linalg.norm(v - np.array(b)) < separation for b in blazes):
                continue
            if blazes and not half_space_ok(v, p, blazes[-1]):
                continue
            chosen = t
            break
        if chosen is None:
            raise GenerationFailure(f"no valid voxel for blaze {len(blazes) + 1}")
        blazes.append(chosen)
    return blazes


def blaze_endpoint(world, blaze) -> tuple:
    """A free face-neighbour of the blaze voxel to fly to (prefers the highest one)."""
    best = None
    for d in ((0, 0, 1), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, -1)):
        n = (blaze[0] + d[0], blaze[1] + d[1], blaze[2] + d[2])
        if world.in_bounds(n) and not world.occupied(n):
            best = n
            break
    if best is None:
        raise ContractViolation(f"blaze {blaze} has no free neighbour")
    return best
