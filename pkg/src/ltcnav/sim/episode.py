"""Closed-loop episodes: sense, replan, act at 20 Hz."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ltcnav.errors import ConfigurationError
from ltcnav.sim.cache import OccupancyCache
from ltcnav.sim.planner import dilate, plan_with_fallback
from ltcnav.sim.raycast import lidar_scan, line_of_sight, segment_clear
from ltcnav.sim.render import Camera, body_to_world, render, world_to_body, yaw_towards
from ltcnav.sim.spline import PursuitTracker, SplinePath, fit_spline
from ltcnav.sim.tasks import (
    SpawnFailure,
    GenerationFailure,
    blaze_endpoint,
    chase_path,
    get_blazes,
    spawn_drone,
    spawn_static_target,
)
from ltcnav.sim.world import Weather

FRAME_DT = 0.05


class TaskKind(str, Enum):
    STATIC = "StaticTarget"
    CHASE = "Chase"
    HIKING = "Hiking"


class Outcome(str, Enum):
    SUCCESS = "success"
    TIMEOUT = "timeout"
    COLLISION = "collision"
    ABORTED = "aborted"


@dataclass
class EpisodeConfig:
    speed: float = 2.0
    lookahead: float = 3.0
    success_radius: float = 1.5
    timeout: float = 60.0           # seconds per sub-goal
    replan_every: int = 10          # ticks between scheduled replans
    margin: int = 1                 # planner safety dilation in voxels
    n_blazes: int = 3
    weather: Weather = Weather.CLEAR
    sync: bool = True
    render_frames: bool = False     # render every record (policies always see frames)

    def __post_init__(self):
        self.weather = Weather(self.weather)
        if self.speed <= 0 or self.lookahead <= 0 or self.success_radius <= 0 or self.timeout <= 0:
            raise ConfigurationError("speed, lookahead, success radius and timeout must be positive")


@dataclass
class TaskSpec:
    kind: TaskKind
    start: np.ndarray
    yaw: float
    goals: list[tuple]                  # static: [target]; hiking: blazes; chase: [path end]
    endpoints: list[tuple] = field(default_factory=list)   # where the planner flies to
    chase: SplinePath | None = None
    seed: int = 0


def make_task(world, kind: TaskKind | str, seed: int, n_blazes: int = 3, camera: Camera | None = None,
              attempts: int = 20) -> TaskSpec:
    """Spawn a drone and a task; respawns the drone when generation fails."""
    kind = TaskKind(kind)
    rng = np.random.default_rng([int(seed), 104729])
    last = None
    for _ in range(attempts):
        try:
            if kind is TaskKind.HIKING:
                pos, yaw = spawn_drone(world, rng, altitude=(2, 4))
                blazes = get_blazes(world, pos, n_blazes)
                ends = [blaze_endpoint(world, b) for b in blazes]
                return TaskSpec(kind, pos, yaw_towards(pos, blazes[0]), blazes, ends, seed=seed)
            pos, yaw = spawn_drone(world, rng)
            if kind is TaskKind.STATIC:
                target = spawn_static_target(world, pos, yaw, rng, camera=camera)
                return TaskSpec(kind, pos, yaw_towards(pos, target), [target], [target], seed=seed)
            spline, walk = chase_path(world, pos, rng)
            end = walk[-1]
            return TaskSpec(kind, pos, yaw_towards(pos, spline.point_at(3.0)), [end], [end], spline, seed)
        except (SpawnFailure, GenerationFailure) as err:
            last = err
    raise SpawnFailure(f"task generation failed after {attempts} attempts: {last}")


@dataclass
class EpisodeRecord:
    t: float
    position: np.ndarray
    yaw: float
    speed: float
    target: np.ndarray
    label: np.ndarray              # unit displacement to the next record, body frame
    image: np.ndarray | None = None
    target_occluded: bool = False
    target_box: tuple | None = None    # visible target pixels in ``image``, if rendered


@dataclass
class EpisodeResult:
    outcome: Outcome
    records: list[EpisodeRecord]
    task: TaskSpec
    replans: int = 0
    subgoals_reached: int = 0

    @property
    def success(self) -> bool:
        return self.outcome is Outcome.SUCCESS

    @property
    def any_occluded(self) -> bool:
        return any(r.target_occluded for r in self.records)


class ScriptedExpert:
    """Pure pursuit along the planner's spline (or the chase path)."""
    name = "ScriptedExpert"
    needs_images = False

    def reset(self):
        pass


class PolicyController:
    """Closed-loop learned policy: image -> body-frame heading."""
    needs_images = True

    def __init__(self, policy):
        self.policy = policy
        self.name = policy.arch
        self.state = None

    def reset(self):
        self.state = None

    def heading(self, image: np.ndarray) -> np.ndarray:
        out, self.state = self.policy.act(image, self.state)
        return out


class ConstantController:
    """Fixed body-frame command (a zero vector hovers in place)."""
    needs_images = False

    def __init__(self, command=(0.0, 0.0, 0.0), name: str = "Constant"):
        self.command = np.asarray(command, dtype=float)
        self.name = name

    def reset(self):
        pass

    def heading(self, image) -> np.ndarray:
        return self.command


def _occluded(world, p, target) -> bool:
    """True when no corner or the centre of the target cube is visible from p."""
    target = np.asarray(target, dtype=float)
    pts = [target] + [target + 0.45 * (2 * np.array(c) - 1) for c in np.ndindex(2, 2, 2)]
    return not any(line_of_sight(world.occ, p, q) for q in pts)


def _watch_set(path) -> set:
    """Voxels within one step of a planned path; new hits here force a replan."""
    offsets = [tuple(np.array(d) - 1) for d in np.ndindex(3, 3, 3)]
    return {(v[0] + d[0], v[1] + d[1], v[2] + d[2]) for v in path for d in offsets}


class _Replanner:
    """Plans on snapshots of the occupancy cache and publishes whole splines."""

    def __init__(self, world, cache: OccupancyCache, cfg: EpisodeConfig):
        self.world, self.cache, self.cfg = world, cache, cfg
        self.lock = threading.Lock()
        self.published: tuple[int, SplinePath | None, list | None] = (0, None, None)
        self.failed = False
        self._event = threading.Event()
        self._request = None
        self._stop = False
        self._thread = None

    def plan(self, start, goal, visible_from=None):
        known = self.cache.to_grid(self.world.shape)
        admissible = None
        if visible_from is not None:
            tgt = np.asarray(visible_from, dtype=float)
            blocked = dilate(known, 0)
            cam = Camera()

            def admissible(v):
                rel = tgt - np.asarray(v, dtype=float)
                horiz = np.hypot(rel[0], rel[1])
                if horiz > 0 and not cam.in_frustum((horiz, 0.0, rel[2])):
                    return False
                return bool(segment_clear(blocked, np.asarray(v, dtype=float), tgt))
        s = tuple(int(x) for x in np.round(start))
        if s == tuple(goal):
            return [s]
        return plan_with_fallback(known, s, goal, admissible, margin=self.cfg.margin)

    def publish(self, path):
        with self.lock:
            n = self.published[0] + 1
            if path is None:
                self.failed = True
                self.published = (n, None, None)
            else:
                knots = path if len(path) > 1 else [path[0], path[0]]
                spline = fit_spline(knots) if len(path) > 1 else None
                self.published = (n, spline, path)

    def snapshot(self):
        with self.lock:
            return self.published

    # asynchronous mode
    def start(self):
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def request(self, start, goal, visible_from):
        with self.lock:
            self._request = (np.array(start), goal, visible_from)
        self._event.set()

    def _loop(self):
        while not self._stop:
            self._event.wait(0.05)
            self._event.clear()
            with self.lock:
                req, self._request = self._request, None
            if req is None:
                continue
            self.publish(self.plan(*req))

    def stop(self):
        self._stop = True
        self._event.set()
        if self._thread is not None:
            self._thread.join(timeout=5)


def run_episode(world, task: TaskSpec, controller, cfg: EpisodeConfig | None = None,
                max_ticks: int | None = None) -> EpisodeResult:
    """Fly one episode. Aborted episodes return no records."""
    cfg = cfg or EpisodeConfig()
    controller.reset()
    expert = isinstance(controller, ScriptedExpert)
    p = np.array(task.start, dtype=float)
    cache = OccupancyCache()
    planner = _Replanner(world, cache, cfg)
    tracker = PursuitTracker(cfg.lookahead)
    chase_tracker = PursuitTracker(cfg.lookahead)
    if task.chase is not None:
        chase_tracker.reset(task.chase, p)
    if not cfg.sync:
        planner.start()
    records: list[EpisodeRecord] = []
    positions: list[np.ndarray] = []
    goal_idx, sub_tick, tick = 0, 0, 0
    seen_version, replans = 0, 0
    yaw = task.yaw
    outcome = Outcome.TIMEOUT
    last_plan_tick = -10 ** 9
    watch: tuple[int, set] = (-1, set())
    try:
        while True:
            t = tick * FRAME_DT
            goal = task.goals[goal_idx]
            endpoint = task.endpoints[goal_idx] if task.endpoints else goal
            # marker the camera faces
            if task.kind is TaskKind.CHASE:
                marker = chase_tracker.spline.point_at(chase_tracker.lookahead_s())
            else:
                marker = np.array(goal, dtype=float)
            if np.hypot(*(marker - p)[:2]) > 1e-6:
                yaw = yaw_towards(p, marker)
            # success test on the final target of this sub-goal
            if np.linalg.norm(p - np.asarray(goal, dtype=float)) <= cfg.success_radius:
                if task.kind is TaskKind.CHASE:
                    # the cube must have reached the end of the path as well
                    done = chase_tracker.lookahead_s() >= chase_tracker.spline.length - 1e-9
                else:
                    done = True
                if done:
                    goal_idx += 1
                    sub_tick = 0
                    last_plan_tick = -10 ** 9
                    if goal_idx == len(task.goals):
                        outcome = Outcome.SUCCESS
                        positions.append(p.copy())
                        records.append(EpisodeRecord(t, p.copy(), yaw, 0.0, marker, np.zeros(3)))
                        break
                    continue
            if sub_tick * FRAME_DT >= cfg.timeout or (max_ticks is not None and tick >= max_ticks):
                outcome = Outcome.TIMEOUT
                positions.append(p.copy())
                records.append(EpisodeRecord(t, p.copy(), yaw, 0.0, marker, np.zeros(3)))
                break
            # sense
            fresh = []
            if expert and task.kind is not TaskKind.CHASE:
                fresh = cache.update(lidar_scan(world, p, tick))
            image, box = None, None
            if controller.needs_images or cfg.render_frames:
                frame = render(world, p, yaw, [marker], cfg.weather, tick)
                image, box = frame.image, frame.target_box()
            occluded = _occluded(world, p, marker)
            # act
            if expert:
                if task.kind is TaskKind.CHASE:
                    aim = chase_tracker.target(p)
                else:
                    version, spline, path = planner.snapshot()
                    need = spline is None and path is None
                    need |= tick - last_plan_tick >= cfg.replan_every
                    if path is not None and fresh:
                        if watch[0] != version:
                            watch = (version, _watch_set(path))
                        need |= any(f in watch[1] for f in fresh)
                    visible = np.array(goal, dtype=float) if task.kind is TaskKind.STATIC else None
                    if need:
                        last_plan_tick = tick
                        if cfg.sync:
                            planner.publish(planner.plan(p, endpoint, visible))
                        else:
                            planner.request(p, endpoint, visible)
                            if spline is None:  # nothing to fly yet: wait for the first plan
                                for _ in range(200):
                                    if planner.snapshot()[0] != version:
                                        break
                                    threading.Event().wait(0.01)
                    version, spline, path = planner.snapshot()
                    if version != seen_version:
                        seen_version = version
                        replans += 1
                        if spline is None and path is None:
                            outcome = Outcome.ABORTED
                            break
                        if spline is not None:
                            tracker.reset(spline, p)
                    aim = tracker.target(p) if tracker.spline is not None else np.asarray(endpoint, float)
                    if spline is None:
                        aim = np.asarray(endpoint, dtype=float)
                delta = aim - p
                dist = float(np.linalg.norm(delta))
                step = min(cfg.speed * FRAME_DT, dist)
                move = delta / dist * step if dist > 0 else np.zeros(3)
            else:
                if task.kind is TaskKind.CHASE:
                    chase_tracker.target(p)
                h_body = np.asarray(controller.heading(image), dtype=float)
                n = float(np.linalg.norm(h_body))
                move = body_to_world(h_body / n, yaw) * cfg.speed * FRAME_DT if n > 1e-12 else np.zeros(3)
            positions.append(p.copy())
            records.append(EpisodeRecord(t, p.copy(), yaw, float(np.linalg.norm(move)) / FRAME_DT,
                                         marker.copy(), np.zeros(3), image, occluded, box))
            p = p + move
            tick += 1
            sub_tick += 1
            if world.occupied_at(p):
                outcome = Outcome.COLLISION
                break
    finally:
        planner.stop()
    if outcome is Outcome.ABORTED:
        return EpisodeResult(outcome, [], task, replans, goal_idx)
    positions.append(p.copy())
    for k, rec in enumerate(records):
        d = world_to_body(positions[k + 1] - positions[k], rec.yaw)
        n = np.linalg.norm(d)
        if n < 1e-12:  # no motion: fall back to the direction of the marker
            d = world_to_body(rec.target - rec.position, rec.yaw)
            n = np.linalg.norm(d)
            if n < 1e-12:
                d, n = np.array([1.0, 0.0, 0.0]), 1.0
        rec.label = d / n
    return EpisodeResult(outcome, records, task, replans, goal_idx)


def render_records(world, result: EpisodeResult, indices, weather: Weather = Weather.CLEAR) -> None:
    """Fill in images for the chosen records (deterministic in world, pose and index)."""
    for k in indices:
        rec = result.records[k]
        frame = render(world, rec.position, rec.yaw, [rec.target], weather, k)
        rec.image, rec.target_box = frame.image, frame.target_box()
