"""Experiment configuration: one JSON document that reproduces a run."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from enum import Enum

from ltcnav.errors import ConfigurationError
from ltcnav.sim.episode import EpisodeConfig, TaskKind
from ltcnav.sim.world import EnvKind, Weather
from ltcnav.train.trainer import TrainConfig

ARCHITECTURES = ("NCP", "CTRNN", "ODERNN", "CTGRU", "LSTM")
ALL_WEATHERS = [w.value for w in Weather]
EVAL_SEED_OFFSET = 100_000     # evaluation worlds never overlap collection worlds
HOLDOUT_SEED_OFFSET = 200_000  # held-out frames for saliency analysis


@dataclass
class ExperimentConfig:
    task: str = "StaticTarget"
    env: str = "Forest"
    arch: str = "NCP"
    seed: int = 0                   # base seed for worlds and tasks
    model_seed: int = 0             # weight initialisation
    episodes: int = 200             # expert episodes attempted during collection
    eval_episodes: int = 20
    eval_weathers: list[str] = field(default_factory=lambda: ["Clear"])
    window: int = 65                # records per training window (64 frame/label pairs)
    multi_window: bool = False      # slice every non-overlapping window instead of one
    sync: bool = True               # deterministic plan-then-act episodes
    saliency_every: int = 0         # during eval, dump saliency every k frames (0 = off)
    causal_frames: int = 200
    probe_points: int = 3
    bench_episodes: int = 200       # collection budget per task in the benchmark
    bench_eval_episodes: int = 20
    dataset: str = ""
    checkpoint: str = ""
    train: dict = field(default_factory=dict)     # TrainConfig overrides
    episode: dict = field(default_factory=dict)   # EpisodeConfig overrides

    def __post_init__(self):
        try:
            self.task = TaskKind(self.task).value
            self.env = EnvKind(self.env).value
            self.eval_weathers = [Weather(w).value for w in self.eval_weathers]
        except ValueError as err:
            raise ConfigurationError(str(err)) from err
        self.arch = self.arch.upper().replace("-", "")
        if self.arch not in ARCHITECTURES:
            raise ConfigurationError(f"unknown architecture {self.arch!r}; choose from {ARCHITECTURES}")
        if self.episodes < 1 or self.eval_episodes < 1 or self.bench_episodes < 1 or self.bench_eval_episodes < 1:
            raise ConfigurationError("episode counts must be >= 1")
        if self.window < 2:
            raise ConfigurationError("window must hold at least two records")
        self.train_config()
        self.episode_config()

    def train_config(self) -> TrainConfig:
        opts = {"sequence_length": self.window - 1, "seed": self.model_seed, **self.train}
        try:
            return TrainConfig(**opts)
        except TypeError as err:
            raise ConfigurationError(f"bad train option: {err}") from err

    def episode_config(self, weather: str = "Clear") -> EpisodeConfig:
        try:
            return EpisodeConfig(**{**self.episode, "weather": weather, "sync": self.sync})
        except TypeError as err:
            raise ConfigurationError(f"bad episode option: {err}") from err

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_plain) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        try:
            data = json.loads(open(path).read())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigurationError(f"cannot read config {path}: {err}") from err
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        return cls.from_dict(data)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())


def _plain(v):
    if isinstance(v, Enum):
        return v.value
    raise TypeError(f"not serializable: {v!r}")
