"""Experiment commands: collect, train, eval, causal and the benchmark suite."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from collections import Counter
from pathlib import Path

import numpy as np

from ltcnav.causal import (
    attention_on_target_score,
    bootstrap_interval,
    export_coefficients_csv,
    export_saliency,
    intervention_coefficients,
    neural_ode_causality_probe,
    policy_saliency,
)
from ltcnav.cli.config import ALL_WEATHERS, ARCHITECTURES, EVAL_SEED_OFFSET, ExperimentConfig
from ltcnav.ctcell.params import CellKind
from ltcnav.errors import ConfigurationError
from ltcnav.sim import (
    PolicyController,
    ScriptedExpert,
    WorldConfig,
    generate_world,
    make_task,
    read_episode,
    render,
    render_records,
    run_episode,
    write_episode,
)
from ltcnav.sim.io import read_manifest
from ltcnav.train import Policy, Window, load_policy, save_checkpoint, train_policy

log = logging.getLogger("ltcnav")

CONTROLLERS = ("policy", "expert", "floor")


# ---------- hashing ----------

def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_sha256(root, exclude=("dataset.json",)) -> str:
    """Hash of every file below ``root`` (relative path and bytes), in sorted order."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        rel = p.relative_to(root).as_posix()
        if p.is_file() and rel not in exclude:
            h.update(rel.encode() + b"\0")
            h.update(file_sha256(p).encode())
    return h.hexdigest()


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------- collect ----------

def window_starts(n_records: int, window: int, multi: bool, rng: np.random.Generator) -> list[int]:
    """Start indices of the training windows cut from an episode of ``n_records``."""
    if n_records < window:
        return []
    if multi:
        return list(range(0, n_records - window + 1, window))
    return [int(rng.integers(0, n_records - window + 1))]


def collect(cfg: ExperimentConfig, out) -> dict:
    """Run expert episodes and write the dataset directory; returns its summary."""
    out = Path(out)
    (out / "episodes").mkdir(parents=True, exist_ok=True)
    ep_cfg = cfg.episode_config("Clear")
    stats: Counter = Counter()
    index = []
    for i in range(cfg.episodes):
        seed = cfg.seed + i
        world = generate_world(WorldConfig(cfg.env, seed=seed))
        task = make_task(world, cfg.task, seed)
        res = run_episode(world, task, ScriptedExpert(), ep_cfg)
        stats[res.outcome.value] += 1
        if not res.success:
            continue
        rng = np.random.default_rng([cfg.seed, i, 65537])
        starts = window_starts(len(res.records), cfg.window, cfg.multi_window, rng)
        if not starts:
            stats["short"] += 1
            continue
        render_records(world, res, sorted({k for s in starts for k in range(s, s + cfg.window)}))
        name = f"ep_{i:05d}"
        write_episode(out / "episodes" / name, res.records, {
            "world_seed": seed, "env": cfg.env, "task": cfg.task, "task_seed": seed,
            "weather": "Clear", "outcome": res.outcome.value, "replans": res.replans})
        index += [(name, s, cfg.window) for s in starts]
    with open(out / "windows.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "start", "length"])
        w.writerows(index)
    cfg.save(out / "config.json")
    summary = {
        "episodes_attempted": cfg.episodes,
        "windows": len(index),
        "outcomes": dict(sorted(stats.items())),
        "config_sha256": cfg.digest(),
        "content_sha256": tree_sha256(out),
    }
    _write_json(out / "dataset.json", summary)
    if len(index) < cfg.episodes:
        log.warning("partial dataset: %d windows from %d attempted episodes (%s)",
                    len(index), cfg.episodes, dict(stats))
    return summary


def load_windows(dataset, verify: bool = True) -> tuple[list[Window], dict]:
    """Training windows of a collected dataset (frames and labels of the first window-1 records)."""
    root = Path(dataset)
    if not (root / "dataset.json").exists():
        raise ConfigurationError(f"{root} is not a dataset directory")
    summary = json.loads((root / "dataset.json").read_text())
    if verify and tree_sha256(root) != summary["content_sha256"]:
        raise ConfigurationError(f"dataset {root} does not match its recorded content hash")
    episodes: dict = {}
    windows = []
    with open(root / "windows.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            name, start, length = row["episode"], int(row["start"]), int(row["length"])
            if name not in episodes:
                episodes[name] = read_episode(root / "episodes" / name)[0]
            recs = episodes[name][start:start + length - 1]
            windows.append(Window(np.stack([r.image for r in recs]), np.stack([r.label for r in recs]), name))
    return windows, summary


# ---------- train ----------

def read_manifest_txt(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def train(cfg: ExperimentConfig, dataset, out) -> dict:
    windows, summary = load_windows(dataset)
    if not windows:
        raise ConfigurationError(f"dataset {dataset} has no windows")
    tcfg = cfg.train_config()
    policy = Policy.build(cfg.arch, image_hw=windows[0].frames.shape[1:3], seed=cfg.model_seed)
    result = train_policy(windows, policy, tcfg, log=log.info)
    out = Path(out)
    save_checkpoint(out, result, tcfg, extra={
        "dataset_sha256": summary["content_sha256"], "config_sha256": cfg.digest(),
        "windows": len(windows)})
    sha = file_sha256(out / "policy.lnav")
    with open(out / "manifest.txt", "a") as fh:
        fh.write(f"policy_sha256={sha}\n")
    cfg.save(out / "config.json")
    best = min(result.history, key=lambda r: r.val_loss.value) if result.history else None
    return {
        "arch": cfg.arch, "best_epoch": result.best_epoch, "epochs_run": len(result.history),
        "best_val_loss": best.val_loss.value if best else None,
        "policy_sha256": sha, "dataset_sha256": summary["content_sha256"],
    }


def load_checkpoint(directory) -> tuple[Policy, dict]:
    """Load a checkpoint directory, checking the policy file against its recorded hash."""
    root = Path(directory)
    if not (root / "policy.lnav").exists():
        raise ConfigurationError(f"{root} has no policy.lnav")
    manifest = read_manifest_txt(root / "manifest.txt")
    sha = file_sha256(root / "policy.lnav")
    if manifest.get("policy_sha256", sha) != sha:
        raise ConfigurationError(f"checkpoint {root} does not match its recorded content hash")
    policy = load_policy(root / "policy.lnav")
    manifest["policy_sha256"] = sha
    return policy, manifest


# ---------- eval ----------

def _controller(kind: str, cfg: ExperimentConfig, policy: Policy | None, trial: int):
    if kind == "expert":
        return ScriptedExpert()
    if kind == "floor":  # a freshly initialised, untrained network per trial
        return PolicyController(Policy.build(cfg.arch, seed=[cfg.model_seed, trial]))
    return PolicyController(policy)


def evaluate(cfg: ExperimentConfig, out, controller: str = "policy", policy: Policy | None = None,
             checkpoint_sha: str | None = None) -> dict:
    """Closed-loop trials for every weather in ``cfg.eval_weathers``; writes report.json."""
    if controller not in CONTROLLERS:
        raise ConfigurationError(f"controller must be one of {CONTROLLERS}")
    if controller == "policy":
        if policy is None:
            policy, manifest = load_checkpoint(cfg.checkpoint)
            checkpoint_sha = manifest["policy_sha256"]
        if policy.arch != cfg.arch:
            raise ConfigurationError(f"checkpoint holds {policy.arch}, config asks for {cfg.arch}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    conditions, episodes = {}, []
    for weather in cfg.eval_weathers:
        ep_cfg = cfg.episode_config(weather)
        outcomes: Counter = Counter()
        attention, occluded = [], 0
        for i in range(cfg.eval_episodes):
            seed = cfg.seed + EVAL_SEED_OFFSET + i
            world = generate_world(WorldConfig(cfg.env, weather=weather, seed=seed))
            task = make_task(world, cfg.task, seed)
            ctrl = _controller(controller, cfg, policy, i)
            res = run_episode(world, task, ctrl, ep_cfg)
            outcomes[res.outcome.value] += 1
            occluded += res.any_occluded
            if cfg.saliency_every > 0 and controller != "expert":
                attention += _dump_saliency(out / "saliency" / weather, f"ep{i:03d}", res,
                                            ctrl.policy, cfg.saliency_every)
            episodes.append({"weather": weather, "seed": seed, "outcome": res.outcome.value,
                             "records": len(res.records), "subgoals": res.subgoals_reached,
                             "occluded": bool(res.any_occluded)})
        n = cfg.eval_episodes
        conditions[weather] = {
            "n": n,
            "success_rate": outcomes["success"] / n,
            "outcomes": dict(sorted(outcomes.items())),
            "occluded_fraction": occluded / n,
            "mean_attention": float(np.mean(attention)) if attention else None,
        }
    report = {
        "controller": controller if controller != "policy" else cfg.arch,
        "arch": cfg.arch, "task": cfg.task, "env": cfg.env,
        "checkpoint_sha256": checkpoint_sha, "config_sha256": cfg.digest(),
        "conditions": conditions, "episodes": episodes,
    }
    _write_json(out / "report.json", report)
    cfg.save(out / "config.json")
    return report


def _dump_saliency(directory: Path, prefix: str, res, policy: Policy, every: int) -> list[float]:
    directory.mkdir(parents=True, exist_ok=True)
    scores = []
    for k in range(0, len(res.records), every):
        rec = res.records[k]
        if rec.image is None:
            continue
        sal = policy_saliency(policy, rec.image, k)
        export_saliency(directory / f"{prefix}_f{k:05d}", rec.image, sal)
        if rec.target_box is not None:
            score = attention_on_target_score(sal, rec.target_box)
            if not score.undefined:
                scores.append(score.value)
    return scores


# ---------- causal ----------

def analysis_frames(dataset, limit: int) -> list[tuple[np.ndarray, tuple]]:
    """Up to ``limit`` dataset frames with a visible target, paired with its pixel box."""
    root = Path(dataset)
    frames = []
    for ep_dir in sorted((root / "episodes").iterdir()):
        manifest = read_manifest(ep_dir)
        world = generate_world(WorldConfig(manifest["env"], seed=manifest["world_seed"]))
        records, _ = read_episode(ep_dir)
        for k in manifest["frames"]:
            rec = records[k]
            box = render(world, rec.position, rec.yaw, [rec.target]).target_box()
            if box is not None:
                frames.append((rec.image, box))
            if len(frames) >= limit:
                return frames
    return frames


def causal(cfg: ExperimentConfig, checkpoints: list[str], dataset, out) -> dict:
    """Saliency overlays, attention scores and (LTC cells) intervention coefficients."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    frames = analysis_frames(dataset, cfg.causal_frames)
    if not frames:
        raise ConfigurationError(f"dataset {dataset} has no frames with a visible target")
    windows, _ = load_windows(dataset, verify=False)
    per_arch, scores = {}, {}
    for ckpt in checkpoints:
        policy, manifest = load_checkpoint(ckpt)
        name = policy.arch if policy.arch not in per_arch else f"{policy.arch}_{len(per_arch)}"
        sal_dir = out / name / "saliency"
        sal_dir.mkdir(parents=True, exist_ok=True)
        vals = []
        for n, (img, box) in enumerate(frames):
            sal = policy_saliency(policy, img, n)
            export_saliency(sal_dir / f"frame{n:04d}", img, sal)
            s = attention_on_target_score(sal, box)
            vals.append(np.nan if s.undefined else s.value)
        vals = np.array(vals)
        scores[name] = vals
        ok = vals[~np.isnan(vals)]
        entry = {
            "checkpoint_sha256": manifest["policy_sha256"], "frames": len(vals),
            "defined": int(ok.size), "mean_attention": float(ok.mean()) if ok.size else None,
            "ci90": list(bootstrap_interval(ok)) if ok.size else None,
        }
        entry.update(_coefficients(policy, windows, out / name, cfg.probe_points))
        per_arch[name] = entry
    report = {"frames": len(frames), "architectures": per_arch, "config_sha256": cfg.digest()}
    if "NCP" in scores and "CTGRU" in scores:
        report["ncp_vs_ctgru"] = attention_ordering(scores["NCP"], scores["CTGRU"])
    _write_json(out / "causal.json", report)
    cfg.save(out / "config.json")
    return report


def attention_ordering(a: np.ndarray, b: np.ndarray, level: float = 0.9) -> dict:
    """Paired comparison of attention scores; ``supported`` when the interval excludes zero from below."""
    both = ~np.isnan(a) & ~np.isnan(b)
    diff = a[both] - b[both]
    if diff.size == 0:
        return {"frames": 0, "supported": False, "flag": "no frames where both scores are defined"}
    lo, hi = bootstrap_interval(diff, level)
    out = {"frames": int(diff.size), "mean_difference": float(diff.mean()), "ci90": [lo, hi],
           "supported": bool(lo > 0)}
    if not out["supported"]:
        out["flag"] = "DISCREPANCY: the interval does not support NCP attending more to the target than CTGRU"
    return out


def _coefficients(policy: Policy, windows: list[Window], out: Path, points: int) -> dict:
    if policy.cell.kind is not CellKind.LTC:
        note = {"coefficients": f"unsupported-architecture: intervention coefficients need an LTC cell, "
                                f"got {policy.cell.kind.value}"}
        if policy.cell.kind is CellKind.ODERNN:
            x0 = np.zeros(policy.cell.state_dim)
            note["ode_probe"] = neural_ode_causality_probe(policy.cell, x0).lines()
        return note
    frames = windows[0].frames[None]
    _, cache = policy.forward_rollout(frames)
    T = frames.shape[1]
    files = []
    for n, t in enumerate(np.linspace(0, T - 1, points).round().astype(int)):
        x, I = cache.states[t][0], cache.features[0, t]
        co = intervention_coefficients(policy.cell, x, I)
        for label, tensor in (("A", co.A_int), ("B", co.B_int), ("C", co.C_int)):
            path = out / f"coef_p{n}_{label}.csv"
            export_coefficients_csv(path, tensor)
            files.append(path.name)
    return {"coefficients": files}


# ---------- benchmark ----------

BENCH_COLUMNS = ([f"StaticTarget/{w}" for w in ALL_WEATHERS] + [f"Chase/{w}" for w in ALL_WEATHERS]
                 + ["Hiking/Clear"])
BENCH_ROWS = ARCHITECTURES + ("Expert",)


def benchmark(cfg: ExperimentConfig, out) -> dict:
    """Collect, train and evaluate every architecture on every condition; writes benchmark.json/.md."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    matrix = {r: {c: None for c in BENCH_COLUMNS} for r in BENCH_ROWS}
    errors = []
    for task, weathers in (("StaticTarget", ALL_WEATHERS), ("Chase", ALL_WEATHERS), ("Hiking", ["Clear"])):
        sub = dataclasses.replace(cfg, task=task, episodes=cfg.bench_episodes,
                                  eval_episodes=cfg.bench_eval_episodes, eval_weathers=list(weathers))
        base = out / task
        try:
            collect(sub, base / "dataset")
        except Exception as err:  # a failed cell must not stop the suite
            errors.append(f"{task} collection: {err!r}")
            continue
        runs = [(arch, "policy") for arch in ARCHITECTURES] + [("Expert", "expert")]
        for row, kind in runs:
            try:
                if kind == "policy":
                    arch_cfg = dataclasses.replace(sub, arch=row)
                    info = train(arch_cfg, base / "dataset", base / row / "checkpoint")
                    arch_cfg.checkpoint = str(base / row / "checkpoint")
                    report = evaluate(arch_cfg, base / row / "eval")
                    log.info("%s %s: best val %.4f", task, row, info["best_val_loss"])
                else:
                    report = evaluate(sub, base / "Expert" / "eval", controller="expert")
                for w in weathers:
                    matrix[row][f"{task}/{w}"] = report["conditions"][w]["success_rate"]
            except Exception as err:
                errors.append(f"{task} {row}: {err!r}")
    summary = summarize_matrix(matrix)
    summary["errors"] = errors
    summary["config_sha256"] = cfg.digest()
    _write_json(out / "benchmark.json", summary)
    (out / "benchmark.md").write_text(format_matrix(summary))
    cfg.save(out / "config.json")
    return summary


def summarize_matrix(matrix: dict) -> dict:
    """Clear-to-HeavyRain degradation per row and the expert-dominance check."""
    degradation = {}
    for row, cells in matrix.items():
        drops = [cells[f"{t}/Clear"] - cells[f"{t}/HeavyRain"] for t in ("StaticTarget", "Chase")
                 if cells[f"{t}/Clear"] is not None and cells[f"{t}/HeavyRain"] is not None]
        degradation[row] = float(np.mean(drops)) if drops else None
    violations = []
    for col in BENCH_COLUMNS:
        e = matrix["Expert"][col]
        for row in ARCHITECTURES:
            v = matrix[row][col]
            if e is not None and v is not None and v > e:
                violations.append(f"{row} beats Expert on {col}: {v:.2f} > {e:.2f}")
    empty = [f"{r}/{c}" for r in matrix for c in matrix[r] if matrix[r][c] is None]
    return {"rows": list(BENCH_ROWS), "columns": BENCH_COLUMNS, "matrix": matrix,
            "degradation_clear_to_heavy_rain": degradation, "expert_dominates": not violations,
            "dominance_violations": violations, "empty_cells": empty}


def format_matrix(summary: dict) -> str:
    cols = summary["columns"]
    lines = ["| controller | " + " | ".join(cols) + " | Clear->HeavyRain drop |",
             "|---" * (len(cols) + 2) + "|"]
    for row in summary["rows"]:
        cells = summary["matrix"][row]
        vals = ["n/a" if cells[c] is None else f"{cells[c]:.2f}" for c in cols]
        d = summary["degradation_clear_to_heavy_rain"][row]
        lines.append(f"| {row} | " + " | ".join(vals) + f" | {'n/a' if d is None else f'{d:+.2f}'} |")
    lines.append("")
    lines.append(f"expert dominates every column: {summary['expert_dominates']}")
    lines += [f"- {v}" for v in summary["dominance_violations"]]
    if summary.get("errors"):
        lines.append("failed cells:")
        lines += [f"- {e}" for e in summary["errors"]]
    return "\n".join(lines) + "\n"
