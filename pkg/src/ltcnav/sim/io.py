"""Episode directories: manifest.json, poses.csv and frames/NNNNN.ppm."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from ltcnav.pnm import read_ppm, write_ppm
from ltcnav.sim.episode import EpisodeRecord

POSE_COLUMNS = ["t", "x", "y", "z", "yaw", "label_x", "label_y", "label_z",
                "speed", "target_x", "target_y", "target_z", "occluded"]


def _fmt(v: float) -> str:
    # repr round-trips a float64 exactly
    return repr(float(v))


def write_episode(directory: str | os.PathLike, records: list[EpisodeRecord], meta: dict) -> Path:
    """Write one episode. Only records that carry an image get a frame file."""
    out = Path(directory)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    manifest = dict(meta)
    manifest["n_records"] = len(records)
    manifest["frames"] = [k for k, r in enumerate(records) if r.image is not None]
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    with open(out / "poses.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POSE_COLUMNS)
        for r in records:
            w.writerow([_fmt(r.t), *map(_fmt, r.position), _fmt(r.yaw), *map(_fmt, r.label),
                        _fmt(r.speed), *map(_fmt, r.target), int(bool(r.target_occluded))])
    for k in manifest["frames"]:
        write_ppm(out / "frames" / f"{k:05d}.ppm", records[k].image)
    return out


def read_manifest(directory: str | os.PathLike) -> dict:
    return json.loads((Path(directory) / "manifest.json").read_text())


def read_episode(directory: str | os.PathLike, load_frames: bool = True) -> tuple[list[EpisodeRecord], dict]:
    """Inverse of :func:`write_episode`; returns (records, manifest)."""
    src = Path(directory)
    manifest = read_manifest(src)
    records = []
    with open(src / "poses.csv", newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if header != POSE_COLUMNS:
            raise ValueError(f"{src}/poses.csv: unexpected columns {header}")
        for row in rows:
            v = [float(x) for x in row[:12]]
            records.append(EpisodeRecord(
                t=v[0], position=np.array(v[1:4]), yaw=v[4], label=np.array(v[5:8]), speed=v[8],
                target=np.array(v[9:12]), target_occluded=bool(int(row[12]))))
    if len(records) != manifest["n_records"]:
        raise ValueError(f"{src}: manifest lists {manifest['n_records']} records, poses.csv has {len(records)}")
    if load_frames:
        for k in manifest["frames"]:
            records[k].image = read_ppm(src / "frames" / f"{k:05d}.ppm")
    return records, manifest
