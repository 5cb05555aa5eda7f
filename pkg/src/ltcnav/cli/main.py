"""Command-line entry point: ``ltcnav {collect,train,eval,causal,benchmark}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from ltcnav.cli import commands
from ltcnav.cli.config import ExperimentConfig
from ltcnav.errors import ConfigurationError, ContractViolation, UnsupportedArchitecture

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON ExperimentConfig to start from")
    common.add_argument("--seed", type=int, help="base seed for worlds and tasks")
    common.add_argument("--task", help="StaticTarget, Chase or Hiking")
    common.add_argument("--arch", help="NCP, CTRNN, ODERNN, CTGRU or LSTM")
    common.add_argument("--weather", help="evaluation weather: Clear, Fog, LightRain or HeavyRain")
    common.add_argument("--episodes", type=int,
                        help="collect: expert episodes; eval: trials per weather; benchmark: trials per cell")
    common.add_argument("--sync", action=argparse.BooleanOptionalAction, default=None,
                        help="deterministic plan-then-act episodes (default on)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ltcnav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("collect", parents=[common], help="record expert episodes into a dataset")
    p = sub.add_parser("train", parents=[common], help="train a policy on a dataset")
    p.add_argument("--dataset", help="dataset directory from collect")
    p = sub.add_parser("eval", parents=[common], help="closed-loop evaluation")
    p.add_argument("--checkpoint", help="checkpoint directory from train")
    p.add_argument("--controller", choices=commands.CONTROLLERS, default="policy",
                   help="policy (checkpoint), expert, or floor (untrained network)")
    p = sub.add_parser("causal", parents=[common], help="saliency, attention and coefficient export")
    p.add_argument("--checkpoint", nargs="+", required=True, help="one or more checkpoint directories")
    p.add_argument("--dataset", help="dataset whose frames are analysed")
    sub.add_parser("benchmark", parents=[common], help="full architecture x condition suite")
    return parser


def resolve_config(args) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config).to_dict() if args.config else {}
    for key in ("seed", "task", "arch"):
        if getattr(args, key) is not None:
            base[key] = getattr(args, key)
    if args.weather is not None:
        base["eval_weathers"] = [args.weather]
    if args.sync is not None:
        base["sync"] = args.sync
    if args.episodes is not None:
        key = {"collect": "episodes", "eval": "eval_episodes", "benchmark": "bench_eval_episodes"}.get(args.command)
        if key:
            base[key] = args.episodes
    if getattr(args, "dataset", None):
        base["dataset"] = args.dataset
    ckpt = getattr(args, "checkpoint", None)
    if isinstance(ckpt, str):
        base["checkpoint"] = ckpt
    return ExperimentConfig.from_dict(base)


def run(args) -> dict:
    cfg = resolve_config(args)
    if args.command == "collect":
        return commands.collect(cfg, args.out)
    if args.command == "train":
        if not cfg.dataset:
            raise ConfigurationError("train needs --dataset (or 'dataset' in the config)")
        return commands.train(cfg, cfg.dataset, args.out)
    if args.command == "eval":
        if args.controller == "policy" and not cfg.checkpoint:
            raise ConfigurationError("eval needs --checkpoint unless --controller is expert or floor")
        report = commands.evaluate(cfg, args.out, controller=args.controller)
        return {"controller": report["controller"],
                "success": {w: c["success_rate"] for w, c in report["conditions"].items()}}
    if args.command == "causal":
        if not cfg.dataset:
            raise ConfigurationError("causal needs --dataset")
        report = commands.causal(cfg, args.checkpoint, cfg.dataset, args.out)
        return {k: v for k, v in report.items() if k != "architectures"} | {
            a: e["mean_attention"] for a, e in report["architectures"].items()}
    summary = commands.benchmark(cfg, args.out)
    return {"expert_dominates": summary["expert_dominates"], "empty_cells": len(summary["empty_cells"]),
            "degradation": summary["degradation_clear_to_heavy_rain"]}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        result = run(args)
    except (ConfigurationError, ContractViolation, UnsupportedArchitecture, FileNotFoundError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:
        print(f"runtime failure: {err!r}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
