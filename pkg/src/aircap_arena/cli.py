"""Command-line entry point: train, eval, baseline, replay, make-trajectory."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import make_strategy
from .config import ArenaConfig, default_config, load_config
from .eval import (eval_policy, eval_strategy, generate_test_trajectory,
                   save_trajectory)
from .geometry import project_skeleton
from .metrics import emit_reports
from .ppo import train
from .world import mav_from_record, person_from_record, read_replay


def _load_config_arg(path) -> ArenaConfig:
    return load_config(path) if path else default_config()


def _cmd_train(args) -> int:
    config = _load_config_arg(args.config)
    result = train(args.variant, config, seed=args.seed, out_dir=args.out,
                   iterations=args.iterations, curriculum_from=args.curriculum_from,
                   resume_from=args.resume_from)
    last = result.metrics[-1] if result.metrics else {}
    print(f"trained variant {args.variant} for {len(result.metrics)} iterations")
    if last:
        print(f"final mean episode reward: {last['mean_ep_reward']:.3f}")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"metrics: {Path(args.out) / 'training_metrics.csv'}")
    return 0


def _cmd_eval(args) -> int:
    config = _load_config_arg(args.config)
    if args.runs is not None or args.seed is not None:
        import dataclasses
        eval_cfg = config.eval
        if args.runs is not None:
            eval_cfg = dataclasses.replace(eval_cfg, runs=args.runs, seeds=None)
        if args.seed is not None:
            eval_cfg = dataclasses.replace(eval_cfg, base_seed=args.seed, seeds=None)
        config = dataclasses.replace(config, eval=eval_cfg)
    report, replays = eval_policy(args.checkpoint, config, out_dir=args.out)
    paths = emit_reports(report, replays, args.out)
    _print_report_summary(report)
    print(f"wrote {paths['metrics']} and {paths['summary']}")
    return 0


def _cmd_baseline(args) -> int:
    config = _load_config_arg(args.config)
    if args.runs is not None:
        import dataclasses
        config = dataclasses.replace(
            config, eval=dataclasses.replace(config.eval, runs=args.runs, seeds=None))
    strategy = make_strategy(args.strategy)
    report, replays = eval_strategy(strategy, config, num_mavs=args.agents,
                                    out_dir=args.out)
    paths = emit_reports(report, replays, args.out)
    _print_report_summary(report)
    print(f"wrote {paths['metrics']} and {paths['summary']}")
    return 0


def _print_report_summary(report):
    summary = report.summary()
    vis = summary["visibility"]["pooled"]
    print(f"visibility: per-agent {vis['per_agent']:.3f}, any-view {vis['any_view']:.3f}")
    for metric in ("cpe", "mpe_mono", "mpe_multi"):
        pooled = summary["pooled"].get(metric)
        if pooled and pooled["count"]:
            print(f"{metric}: median {pooled['p50']:.4f} over {pooled['count']} rows")
    if summary["min_inter_mav_distance"] is not None:
        print(f"min inter-MAV distance: {summary['min_inter_mav_distance']:.3f} m")


def _cmd_replay(args) -> int:
    config = _load_config_arg(args.config)
    header, records = read_replay(args.log)
    cam = config.world.camera
    steps = len(records)
    if steps == 0:
        print("empty replay")
        return 0
    k = header["num_mavs"]
    visible_counts = np.zeros(k)
    cpe_sums = np.zeros(k)
    cpe_counts = np.zeros(k)
    min_inter = None
    for rec in records:
        person = person_from_record(rec["person"])
        mavs = [mav_from_record(m, cam) for m in rec["mavs"]]
        for i, mav in enumerate(mavs):
            _dets, bbox = project_skeleton(person, mav, cam)
            if bbox is not None:
                visible_counts[i] += 1
                center = np.array([cam.principal_point[0], cam.principal_point[1]])
                cpe_sums[i] += float(np.linalg.norm(bbox.center - center))
                cpe_counts[i] += 1
        if k >= 2:
            d = float(np.linalg.norm(mavs[0].position - mavs[1].position))
            min_inter = d if min_inter is None else min(min_inter, d)
    print(f"replay: {steps} records, dt={header['dt']} s, {k} MAV(s), seed={header['seed']}")
    for i in range(k):
        frac = visible_counts[i] / steps
        mean_cpe = cpe_sums[i] / cpe_counts[i] if cpe_counts[i] else float("nan")
        print(f"agent {i}: visibility {frac:.3f}, mean CPE {mean_cpe:.2f} px")
    if min_inter is not None:
        print(f"min inter-MAV distance: {min_inter:.3f} m")
    return 0


def _cmd_make_trajectory(args) -> int:
    config = _load_config_arg(args.config)
    states = generate_test_trajectory(config, seed=args.seed, duration_s=args.duration)
    save_trajectory(states, args.out, dt=config.world.dt, seed=args.seed)
    print(f"wrote {len(states)} states to {args.out}")
    return 0


def _cmd_show_config(args) -> int:
    from .config import config_to_dict
    json.dump(config_to_dict(default_config()), sys.stdout, indent=2)
    print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aircap-arena",
                                     description="Aerial MoCap formation-control arena")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network variant")
    p.add_argument("--variant", required=True, choices=["1.1", "1.2", "1.3", "1.4",
                                                        "2.1", "2.2", "2.3", "2.4"])
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--curriculum-from", default=None,
                   help="checkpoint of a pretrained navigation policy")
    p.add_argument("--resume-from", default=None, help="checkpoint to resume")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="base seed for run seeds")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("baseline", help="evaluate a scripted strategy")
    p.add_argument("--strategy", required=True, choices=["orbit", "frontal"])
    p.add_argument("--agents", type=int, default=1, choices=[1, 2])
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("replay", help="summarize a replay log")
    p.add_argument("--log", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("make-trajectory", help="regenerate a scripted test walk")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--duration", type=float, default=120.0)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_make_trajectory)

    p = sub.add_parser("show-config", help="print the default JSON config")
    p.set_defaults(func=_cmd_show_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
