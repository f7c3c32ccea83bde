"""Variant-aware training/evaluation environment.

Wraps the world with the observation builder, the per-variant reward
composition and the variant-specific behaviors: the yaw servo that replaces
yaw control for the static-subject variants, and the environment-level
potential-field avoidance.  Policy actions are clamped to the velocity and
yaw-rate bounds here, at the environment boundary.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .avoidance import potential_field_avoidance
from .config import ArenaConfig
from .errors import DegenerateGeometry
from .geometry import project_skeleton, wrap_angle
from .perception import (ObsVariant, build_observation, monocular_pose_proxy,
                         multiview_pose_estimate, noise_rng, proxy_rng)
from .rewards import RewardInputs, compose
from .variants import VariantSpec
from .world import Action, reset_episode, step_env

# Fixed feature scales applied to network inputs; observations and states
# themselves stay in physical units.
POS_SCALE = 0.1
VEL_SCALE = 0.5
ANG_SCALE = 1.0 / math.pi

_PAIR_STREAM_AGENT = 2   # rng tag for the shared two-view detection noise


def _obs_scale(variant: ObsVariant) -> np.ndarray:
    pos = [POS_SCALE] * 3
    vel = [VEL_SCALE] * 3
    if variant is ObsVariant.SINGLE:
        return np.array(pos + vel + [ANG_SCALE])
    if variant is ObsVariant.MULTI:
        return np.array(pos + vel + [ANG_SCALE] + pos + [ANG_SCALE])
    return np.array(pos + [ANG_SCALE] + pos + [ANG_SCALE])


class TrackingEnv:
    """One seeded episode generator for a network variant."""

    def __init__(self, spec: VariantSpec, config: ArenaConfig, seed: int,
                 scripted_person=None):
        world_cfg = config.world
        static = spec.static_subject or world_cfg.actor.static
        if world_cfg.num_mavs != spec.num_mavs or world_cfg.actor.static != static:
            world_cfg = dataclasses.replace(
                world_cfg, num_mavs=spec.num_mavs,
                actor=dataclasses.replace(world_cfg.actor, static=static))
        self.spec = spec
        self.config = config
        self.world_config = world_cfg
        self.seed = seed
        self.scripted_person = scripted_person
        self.world = None
        self._obs_scale_vec = _obs_scale(spec.obs_variant)

    @property
    def num_agents(self) -> int:
        return self.spec.num_mavs

    def reset(self) -> tuple[np.ndarray, np.ndarray]:
        self.world = reset_episode(self.world_config, self.seed,
                                   scripted_person=self.scripted_person)
        return self.obs_vectors(), self.state_vector()

    def observations(self):
        return [build_observation(self.world, k, self.spec.obs_variant)
                for k in range(self.num_agents)]

    def obs_vectors(self) -> np.ndarray:
        return np.stack([o.to_vector() * self._obs_scale_vec for o in self.observations()])

    def state_vector(self) -> np.ndarray:
        parts = []
        for mav in self.world.mavs:
            parts.extend([mav.position * POS_SCALE, [wrap_angle(mav.yaw) * ANG_SCALE]])
        person = self.world.person
        parts.extend([person.root * POS_SCALE, [wrap_angle(person.yaw) * ANG_SCALE]])
        return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])

    def _yaw_servo(self, agent: int) -> float:
        mav = self.world.mavs[agent]
        person = self.world.person
        bearing = math.atan2(person.root[1] - mav.position[1],
                             person.root[0] - mav.position[0])
        cfg = self.world_config
        return max(-cfg.omega_max, min(cfg.omega_max, wrap_angle(bearing - mav.yaw) / cfg.dt))

    def _assemble_actions(self, raw_actions: np.ndarray) -> list[Action]:
        cfg = self.world_config
        actions = []
        for k in range(self.num_agents):
            raw = np.asarray(raw_actions[k], dtype=float)
            if raw.shape != (self.spec.action_dim,):
                raise ValueError(
                    f"variant {self.spec.name} expects action dim {self.spec.action_dim}, "
                    f"got shape {raw.shape}")
            velocity = np.clip(raw[:3], -cfg.v_max, cfg.v_max)
            if self.spec.yaw_servo:
                yaw_rate = self._yaw_servo(k)
            else:
                yaw_rate = max(-cfg.omega_max, min(cfg.omega_max, float(raw[3])))
            actions.append(Action(velocity=velocity, yaw_rate=yaw_rate))
        return actions

    def step(self, raw_actions: np.ndarray):
        """Advance one step; returns (obs, state, rewards (K,), done, info)."""
        actions = self._assemble_actions(raw_actions)
        if self.spec.env_potential_field:
            actions = potential_field_avoidance(actions, self.world, self.config.rewards)
        self.world, events = step_env(self.world, actions)
        rewards, breakdowns, visible = self._compute_rewards(events)
        info = {"events": events, "breakdowns": breakdowns, "visible": visible,
                "actions": actions}
        return self.obs_vectors(), self.state_vector(), rewards, events.done, info

    def _compute_rewards(self, events):
        world = self.world
        spec = self.spec
        step = world.step_index
        reward_cfg = self.config.rewards
        noise_cfg = self.config.noise
        truth = world.person.joints
        multi = spec.num_mavs >= 2

        boxes = [project_skeleton(world.person, m, m.camera)[1] for m in world.mavs]
        needs_mono = any(c in ("spin", "wspin") for c in spec.components)
        mono = []
        if needs_mono:
            mono = [monocular_pose_proxy(world, k, proxy_rng(self.seed, step, k), noise_cfg)
                    for k in range(spec.num_mavs)]
        multi_joints = None
        multi_valid = None
        if any(c in ("triag", "mhmr") for c in spec.components):
            try:
                multi_joints, multi_valid = multiview_pose_estimate(
                    world, 0, 1, noise_cfg,
                    noise_rng(self.seed, step, _PAIR_STREAM_AGENT))
            except DegenerateGeometry:
                multi_joints, multi_valid = None, None  # co-located agents: estimate invalid

        rewards = np.empty(spec.num_mavs)
        breakdowns = []
        for k in range(spec.num_mavs):
            inputs = RewardInputs(
                bbox=boxes[k],
                camera=world.mavs[k].camera,
                mono_joints=mono[k].joints if needs_mono else None,
                mono_valid=mono[k].valid if needs_mono else False,
                multi_joints=multi_joints,
                multi_valid=multi_valid,
                truth_joints=truth,
                neighbor_distance=events.inter_mav_distance if multi else None,
                workspace_violated=(bool(events.workspace_violation[k])
                                    if reward_cfg.workspace_penalty else None),
                has_multi_inputs=multi,
            )
            breakdown = compose(spec.name, inputs, reward_cfg)
            rewards[k] = breakdown.total
            breakdowns.append(breakdown)
        visible = [b is not None for b in boxes]
        return rewards, breakdowns, visible
