"""Configuration blocks and their JSON round-trip.

The on-disk schema is one JSON object with optional blocks ``world``,
``noise``, ``rewards``, ``train`` and ``eval``; unknown keys are rejected so
typos fail loudly.  See README for the full schema.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .actor import ActorParams, SkeletonTemplate
from .errors import ConfigError
from .geometry import CameraModel
from .perception import NoiseConfig
from .rewards import RewardConfig
from .world import WorldConfig, Workspace


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    learning_rate: float = 3e-4
    critic_learning_rate: float = 1e-3
    epochs: int = 4
    minibatch_size: int = 256
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    iterations: int = 200
    workers: int = 5
    normalize_advantages: bool = True
    initial_std: float = 0.5
    checkpoint_every: int = 50
    debug_asserts: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError(f"gae_lambda must lie in [0, 1], got {self.gae_lambda}")
        if self.clip_ratio <= 0.0:
            raise ConfigError(f"clip_ratio must be positive, got {self.clip_ratio}")
        if self.workers < 1 or self.iterations < 0:
            raise ConfigError("workers must be >= 1 and iterations >= 0")


@dataclass(frozen=True)
class EvalConfig:
    runs: int = 20
    duration_s: float = 120.0
    base_seed: int = 1000
    seeds: tuple[int, ...] | None = None   # overrides base_seed when given

    def __post_init__(self):
        if self.runs < 1 or self.duration_s <= 0:
            raise ConfigError("runs must be >= 1 and duration_s positive")

    def run_seeds(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.base_seed + i for i in range(self.runs)]


@dataclass(frozen=True)
class ArenaConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


def _check_keys(block: dict, allowed, where: str):
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in config block '{where}'")


def _simple_from_dict(cls, block: dict, where: str, casts: dict | None = None):
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(block, names, where)
    kwargs = dict(block)
    for key, cast in (casts or {}).items():
        if key in kwargs and kwargs[key] is not None:
            kwargs[key] = cast(kwargs[key])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{where}' block: {exc}") from exc


def _world_from_dict(block: dict) -> WorldConfig:
    _check_keys(block, ["dt", "t_episode", "num_mavs", "v_max", "omega_max", "k_p",
                        "spawn_separation", "workspace", "camera", "skeleton", "actor"], "world")
    kwargs = {k: v for k, v in block.items()
              if k not in ("workspace", "camera", "skeleton", "actor")}
    if "workspace" in block:
        ws = block["workspace"]
        _check_keys(ws, ["x", "y", "alt"], "world.workspace")
        kwargs["workspace"] = Workspace(
            x_bounds=tuple(ws.get("x", Workspace.x_bounds)),
            y_bounds=tuple(ws.get("y", Workspace.y_bounds)),
            alt_bounds=tuple(ws.get("alt", Workspace.alt_bounds)))
    if "camera" in block:
        cam = dict(block["camera"])
        _check_keys(cam, ["focal_px", "principal_point", "image_size", "pitch_cam_deg"],
                    "world.camera")
        if "pitch_cam_deg" in cam:
            cam["pitch_cam"] = math.radians(cam.pop("pitch_cam_deg"))
        if "principal_point" in cam:
            cam["principal_point"] = tuple(cam["principal_point"])
        if "image_size" in cam:
            cam["image_size"] = tuple(cam["image_size"])
        try:
            kwargs["camera"] = CameraModel(**cam)
        except ValueError as exc:
            raise ConfigError(f"invalid camera: {exc}") from exc
    if "skeleton" in block:
        kwargs["skeleton"] = _simple_from_dict(SkeletonTemplate, block["skeleton"],
                                               "world.skeleton")
    if "actor" in block:
        kwargs["actor"] = _simple_from_dict(ActorParams, block["actor"], "world.actor",
                                            casts={"speed_range": tuple})
    try:
        return WorldConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid 'world' block: {exc}") from exc


def _rewards_from_dict(block: dict) -> RewardConfig:
    return _simple_from_dict(RewardConfig, block, "rewards",
                             casts={"joint_weights": lambda w: np.asarray(w, dtype=float)})


def config_from_dict(data: dict) -> ArenaConfig:
    _check_keys(data, ["world", "noise", "rewards", "train", "eval"], "<root>")
    return ArenaConfig(
        world=_world_from_dict(data.get("world", {})),
        noise=_simple_from_dict(NoiseConfig, data.get("noise", {}), "noise"),
        rewards=_rewards_from_dict(data.get("rewards", {})),
        train=_simple_from_dict(TrainConfig, data.get("train", {}), "train"),
        eval=_simple_from_dict(EvalConfig, data.get("eval", {}), "eval",
                               casts={"seeds": tuple}),
    )


def config_to_dict(cfg: ArenaConfig) -> dict:
    w = cfg.world
    return {
        "world": {
            "dt": w.dt, "t_episode": w.t_episode, "num_mavs": w.num_mavs,
            "v_max": w.v_max, "omega_max": w.omega_max, "k_p": w.k_p,
            "spawn_separation": w.spawn_separation,
            "workspace": {"x": list(w.workspace.x_bounds),
                          "y": list(w.workspace.y_bounds),
                          "alt": list(w.workspace.alt_bounds)},
            "camera": {"focal_px": w.camera.focal_px,
                       "principal_point": list(w.camera.principal_point),
                       "image_size": list(w.camera.image_size),
                       "pitch_cam_deg": math.degrees(w.camera.pitch_cam)},
            "skeleton": dataclasses.asdict(w.skeleton),
            "actor": {**dataclasses.asdict(w.actor),
                      "speed_range": list(w.actor.speed_range)},
        },
        "noise": dataclasses.asdict(cfg.noise),
        "rewards": {**dataclasses.asdict(cfg.rewards),
                    "joint_weights": cfg.rewards.joint_weights.tolist()},
        "train": dataclasses.asdict(cfg.train),
        "eval": {**dataclasses.asdict(cfg.eval),
                 "seeds": list(cfg.eval.seeds) if cfg.eval.seeds is not None else None},
    }


def load_config(path) -> ArenaConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return config_from_dict(data)


def save_config(cfg: ArenaConfig, path):
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")


def default_config() -> ArenaConfig:
    return ArenaConfig()
