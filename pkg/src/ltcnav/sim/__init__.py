"""Voxel-world flight simulator: lidar, planning, pursuit, task generators and rendering."""
from ltcnav.sim.cache import OccupancyCache
from ltcnav.sim.episode import (
    FRAME_DT,
    ConstantController,
    EpisodeConfig,
    EpisodeRecord,
    EpisodeResult,
    Outcome,
    PolicyController,
    ScriptedExpert,
    TaskKind,
    TaskSpec,
    make_task,
    render_records,
    run_episode,
)
from ltcnav.sim.io import read_episode, write_episode
from ltcnav.sim.planner import greedy_plan, path_is_valid, plan_with_fallback
from ltcnav.sim.raycast import lidar_scan, line_of_sight
from ltcnav.sim.render import Camera, Frame, render
from ltcnav.sim.spline import DegenerateSegment, PursuitTracker, SplinePath, fit_spline, pursuit_point
from ltcnav.sim.tasks import (
    GenerationFailure,
    SpawnFailure,
    chase_path,
    get_blazes,
    spawn_drone,
    spawn_static_target,
)
from ltcnav.sim.world import EnvKind, Weather, World, WorldConfig, generate_world

__all__ = [
    "FRAME_DT", "Camera", "ConstantController", "DegenerateSegment", "EnvKind", "EpisodeConfig",
    "EpisodeRecord", "EpisodeResult", "Frame", "GenerationFailure", "OccupancyCache", "Outcome",
    "PolicyController", "PursuitTracker", "ScriptedExpert", "SpawnFailure", "SplinePath", "TaskKind",
    "TaskSpec", "Weather", "World", "WorldConfig", "chase_path", "fit_spline", "generate_world",
    "get_blazes", "greedy_plan", "lidar_scan", "line_of_sight", "make_task", "path_is_valid",
    "plan_with_fallback", "pursuit_point", "read_episode", "render", "render_records",
    "run_episode", "spawn_drone", "spawn_static_target", "write_episode",
]
