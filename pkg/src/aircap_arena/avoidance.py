"""Environment-level potential-field collision avoidance for the two-MAV case.

Two layers of protection: a repulsive velocity term that activates inside
d_lthresh, and a one-step lookahead that uniformly scales both commands
whenever the predicted next-step separation would fall below d_lthresh.
Prediction models the execution pipeline (first-order tracker with gain k_p
and a per-world-axis velocity clamp), and modified commands are pre-scaled
so that execution stays linear; the lookahead bound is therefore exact.
Actions are returned untouched (same objects) when neither layer fires.
"""

from __future__ import annotations

import math

import numpy as np

from .rewards import RewardConfig, v_pot
from .world import Action, WorldState


def _to_world(v_ego: np.ndarray, yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c * v_ego[0] - s * v_ego[1], s * v_ego[0] + c * v_ego[1], v_ego[2]])


def _to_ego(v_world: np.ndarray, yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c * v_world[0] + s * v_world[1],
                     -s * v_world[0] + c * v_world[1], v_world[2]])


def _executed(v_cmd_world: np.ndarray, k_p: float, v_max: float) -> np.ndarray:
    """Velocity the waypoint tracker realizes for a world-frame command."""
    return np.clip(k_p * v_cmd_world, -v_max, v_max)


def _approach_scale(x_rel: np.ndarray, v_rel: np.ndarray, dt: float, d_min: float) -> float:
    """Largest s in [0, 1] with ||x_rel + s*dt*v_rel|| >= d_min.

    The feasible set of the quadratic ||x + s dt v||^2 >= d_min^2 containing
    0 is [0, root-], with root- the smaller root when real roots exist.  At
    or inside the safety radius the pair is frozen unless already separating.
    """
    a = float(v_rel @ v_rel) * dt * dt
    b = 2.0 * float(x_rel @ v_rel) * dt
    c = float(x_rel @ x_rel) - d_min * d_min
    if c <= 0.0:
        return 0.0 if b < 0.0 else 1.0
    if a < 1e-18:
        return 1.0
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        return 1.0
    lo = (-b - math.sqrt(disc)) / (2.0 * a)
    if lo >= 1.0 or lo < 0.0:
        return 1.0
    return lo


def potential_field_avoidance(actions: list[Action], world: WorldState,
                              cfg: RewardConfig) -> list[Action]:
    """Modify the two proposed actions so the pair cannot close below d_lthresh.

    Identity (original objects) when the agents are separated and the
    commanded step keeps them separated.  Yaw rates are never touched.
    """
    if world.config.num_mavs != 2:
        raise ValueError("potential-field avoidance is defined for exactly 2 MAVs")
    dt = world.config.dt
    v_max = world.config.v_max
    k_p = world.config.k_p
    mav_a, mav_b = world.mavs
    yaws = (mav_a.yaw, mav_b.yaw)
    x_rel = mav_a.position - mav_b.position
    dist = float(np.linalg.norm(x_rel))

    # Safety radius slightly above d_lthresh so rounding in the position
    # integration can never land the pair below the threshold itself.
    d_safe = cfg.d_lthresh * (1.0 + 1e-6)
    cmds = [_to_world(np.clip(a.velocity, -v_max, v_max), yaw)
            for a, yaw in zip(actions, yaws)]
    exec_rel = (_executed(cmds[0], k_p, v_max) - _executed(cmds[1], k_p, v_max))
    predicted = float(np.linalg.norm(x_rel + exec_rel * dt))
    inside = 0.0 < dist < cfg.d_lthresh
    if not inside and predicted >= d_safe:
        return actions

    if inside:
        push = v_pot(dist, cfg) * v_max * (x_rel / dist)
        cmds[0] = cmds[0] + push
        cmds[1] = cmds[1] - push

    # pre-scale each command so execution is linear in further scaling:
    # ego components within the action bounds, tracked velocity unclipped
    for i, yaw in enumerate(yaws):
        over = max(1.0,
                   float(np.abs(_to_ego(cmds[i], yaw)).max()) / v_max,
                   k_p * float(np.abs(cmds[i]).max()) / v_max)
        cmds[i] = cmds[i] / over

    if dist >= cfg.d_lthresh:
        exec_rel = k_p * (cmds[0] - cmds[1])
        if float(np.linalg.norm(x_rel + exec_rel * dt)) < d_safe:
            scale = _approach_scale(x_rel, exec_rel, dt, d_safe)
            cmds[0] = cmds[0] * scale
            cmds[1] = cmds[1] * scale

    return [Action(velocity=_to_ego(cmds[i], yaws[i]), yaw_rate=actions[i].yaw_rate)
            for i in range(2)]
