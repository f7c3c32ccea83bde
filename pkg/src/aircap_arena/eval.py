"""Evaluation orchestration on the fixed published test trajectory.

Every variant and strategy is evaluated against the same 120 s scripted
walk, shipped as a JSON asset, so results are comparable across runs and
implementations.  Runs are independent; AIRCAP_ARENA_THREADS caps how many
execute concurrently (results are assembled by run index either way).
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from .actor import PersonState, spawn_person
from .config import ArenaConfig
from .envs import TrackingEnv
from .errors import DegenerateGeometry
from .geometry import project_skeleton, wrap_angle
from .metrics import (METRIC_ANY_VISIBLE, METRIC_CPE, METRIC_INTER_MAV,
                      METRIC_MPE_MONO, METRIC_MPE_MULTI, METRIC_VISIBLE,
                      PAIR_AGENT, MetricsReport)
from .perception import (monocular_pose_proxy, multiview_pose_estimate,
                         noise_rng, proxy_rng)
from .ppo import load_checkpoint
from .nets import policy_mean
from .variants import get_variant
from .world import (MavState, ReplayWriter, WorldState, actor_step,
                    reset_episode, step_env)

TRAJECTORY_VERSION = 1
_PAIR_STREAM_AGENT = 2
THREADS_ENV_VAR = "AIRCAP_ARENA_THREADS"


def max_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# --- fixed test trajectory ----------------------------------------------------

def generate_test_trajectory(config: ArenaConfig, seed: int, duration_s: float) -> list[PersonState]:
    """Simulate the walking subject for `duration_s` and return all states."""
    w = config.world
    steps = int(round(duration_s / w.dt))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    interior = w.workspace.interior_xy(w.actor.margin)
    person = spawn_person(w.skeleton, w.actor, interior, rng)
    states = [person]
    for _ in range(steps):
        person = actor_step(person, w.dt, rng, w.skeleton, w.actor, interior)
        states.append(person)
    return states


def save_trajectory(states: list[PersonState], path, dt: float, seed: int):
    payload = {
        "version": TRAJECTORY_VERSION, "dt": dt, "seed": seed,
        "states": [{"root": s.root.tolist(), "yaw": s.yaw,
                    "velocity": s.velocity.tolist(), "joints": s.joints.tolist()}
                   for s in states],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def _states_from_payload(payload: dict) -> list[PersonState]:
    if payload.get("version") != TRAJECTORY_VERSION:
        raise ValueError(f"unsupported trajectory version {payload.get('version')}")
    return [PersonState(root=np.array(s["root"], dtype=float), yaw=float(s["yaw"]),
                        velocity=np.array(s["velocity"], dtype=float),
                        joints=np.array(s["joints"], dtype=float))
            for s in payload["states"]]


def load_trajectory(path) -> list[PersonState]:
    with open(path) as fh:
        return _states_from_payload(json.load(fh))


def load_test_trajectory() -> list[PersonState]:
    """The packaged 120 s test walk."""
    ref = resources.files("aircap_arena").joinpath("assets/test_trajectory.json")
    with ref.open() as fh:
        return _states_from_payload(json.load(fh))


# --- per-step metric extraction -------------------------------------------------

def _step_metrics(report: MetricsReport, world: WorldState, events, run: int,
                  step: int, seed: int, noise_cfg, multi: bool):
    boxes = []
    for k, mav in enumerate(world.mavs):
        dets, bbox = project_skeleton(world.person, mav, mav.camera)
        boxes.append(bbox)
        report.add(run, step, k, METRIC_VISIBLE, 1.0 if bbox is not None else 0.0)
        if bbox is not None:
            u0, v0 = mav.camera.principal_point
            cpe = float(np.linalg.norm(bbox.center - np.array([u0, v0])))
            report.add(run, step, k, METRIC_CPE, cpe)
        est = monocular_pose_proxy(world, k, proxy_rng(seed, step, k), noise_cfg)
        if est.valid:
            d_j = float(np.linalg.norm(est.joints - world.person.joints, axis=1).mean())
            report.add(run, step, k, METRIC_MPE_MONO, d_j)
    report.add(run, step, PAIR_AGENT, METRIC_ANY_VISIBLE,
               1.0 if any(b is not None for b in boxes) else 0.0)
    if multi:
        report.add(run, step, PAIR_AGENT, METRIC_INTER_MAV, events.inter_mav_distance)
        try:
            joints, valid = multiview_pose_estimate(
                world, 0, 1, noise_cfg, noise_rng(seed, step, _PAIR_STREAM_AGENT))
        except DegenerateGeometry:
            joints, valid = None, None
        if valid is not None and valid.any():
            d_tri = float(np.linalg.norm(
                joints[valid] - world.person.joints[valid], axis=1).mean())
            report.add(run, step, PAIR_AGENT, METRIC_MPE_MULTI, d_tri)


# --- evaluation drivers ----------------------------------------------------------

def _eval_steps(duration_s: float, dt: float) -> int:
    return int(round(duration_s / dt))


def eval_policy(checkpoint_path, config: ArenaConfig, out_dir=None,
                variant: str | None = None,
                write_replays: bool = True) -> tuple[MetricsReport, list]:
    """Evaluate a trained policy on the fixed trajectory with its mean action.

    Raises CheckpointMismatch when `variant` is given and differs from the
    checkpoint's variant.
    """
    snap = load_checkpoint(checkpoint_path, expected_variant=variant)
    spec = get_variant(snap["variant"])
    theta = snap["theta"]
    trajectory = load_test_trajectory()
    steps = min(_eval_steps(config.eval.duration_s, config.world.dt), len(trajectory) - 1)
    seeds = config.eval.run_seeds()
    noise_cfg = config.noise
    multi = spec.num_mavs >= 2
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        (out_dir / "replays").mkdir(parents=True, exist_ok=True)

    def one_run(run: int):
        seed = seeds[run]
        report = MetricsReport()
        env = TrackingEnv(spec, config, seed=seed, scripted_person=trajectory)
        obs, _state = env.reset()
        writer = None
        path = None
        if write_replays and out_dir is not None:
            path = out_dir / "replays" / f"run_{run:03d}.ndjson"
            writer = ReplayWriter(path, env.world_config, seed)
            writer.write(env.world)
        for step_i in range(steps):
            actions = np.stack([policy_mean(theta, obs[k]) for k in range(env.num_agents)])
            obs, _state, _rewards, _done, info = env.step(actions)
            _step_metrics(report, env.world, info["events"], run,
                          env.world.step_index, seed, noise_cfg, multi)
            if writer is not None:
                writer.write(env.world, info["actions"], info["events"])
        if writer is not None:
            writer.close()
        return report.rows, path

    return _gather_runs(one_run, len(seeds))


def eval_strategy(strategy, config: ArenaConfig, num_mavs: int, out_dir=None,
                  write_replays: bool = True) -> tuple[MetricsReport, list]:
    """Evaluate a scripted strategy; agents spawn at its preferred stations."""
    trajectory = load_test_trajectory()
    steps = min(_eval_steps(config.eval.duration_s, config.world.dt), len(trajectory) - 1)
    seeds = config.eval.run_seeds()
    noise_cfg = config.noise
    multi = num_mavs >= 2
    world_cfg = dataclasses.replace(config.world, num_mavs=num_mavs)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        (out_dir / "replays").mkdir(parents=True, exist_ok=True)

    def one_run(run: int):
        seed = seeds[run]
        report = MetricsReport()
        world = reset_episode(world_cfg, seed, scripted_person=trajectory)
        person = world.person
        mavs = []
        for k in range(num_mavs):
            if hasattr(strategy, "spawn_position"):
                pos = strategy.spawn_position(person.root, k)
            else:
                pos = world.mavs[k].position
            bearing = math.atan2(person.root[1] - pos[1], person.root[0] - pos[0])
            mavs.append(MavState(position=np.asarray(pos, dtype=float),
                                 yaw=wrap_angle(bearing), velocity=np.zeros(3),
                                 yaw_rate=0.0, camera=world_cfg.camera))
        world.mavs = mavs
        writer = None
        path = None
        if write_replays and out_dir is not None:
            path = out_dir / "replays" / f"run_{run:03d}.ndjson"
            writer = ReplayWriter(path, world_cfg, seed)
            writer.write(world)
        for _step in range(steps):
            actions = [strategy.action(world, k) for k in range(num_mavs)]
            world, events = step_env(world, actions)
            _step_metrics(report, world, events, run, world.step_index,
                          seed, noise_cfg, multi)
            if writer is not None:
                writer.write(world, actions, events)
        if writer is not None:
            writer.close()
        return report.rows, path

    return _gather_runs(one_run, len(seeds))


def _gather_runs(one_run, runs: int) -> tuple[MetricsReport, list]:
    threads = max_threads()
    results = [None] * runs
    if threads <= 1:
        for run in range(runs):
            results[run] = one_run(run)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for run, res in enumerate(pool.map(one_run, range(runs))):
                results[run] = res
    report = MetricsReport()
    replay_paths = []
    for rows, path in results:
        report.extend(rows)
        if path is not None:
            replay_paths.append(path)
    return report, replay_paths
