"""Scripted comparison strategies.

Both strategies read the ground-truth person state, stand in for the
hand-crafted controllers the learned policies are compared against, and emit
bounded Action commands directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle
from .world import Action, MavState, WorldState


def _to_ego(v_world: np.ndarray, yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c * v_world[0] + s * v_world[1],
                     -s * v_world[0] + c * v_world[1], v_world[2]])


def _face_person(mav: MavState, person_root: np.ndarray, dt: float, omega_max: float) -> float:
    bearing = math.atan2(person_root[1] - mav.position[1],
                         person_root[0] - mav.position[0])
    return max(-omega_max, min(omega_max, wrap_angle(bearing - mav.yaw) / dt))


@dataclass(frozen=True)
class OrbitStrategy:
    """Circle the person at a fixed radius and altitude, camera on the person.

    Each agent tracks its own moving slot on the circle (phase offset by
    agent index, advancing at speed/radius), which keeps a pair separated at
    its spawn offset instead of bunching up while chasing a walking person.
    """

    radius: float = 5.0
    speed: float = 1.0                     # tangential, m/s
    altitude: float = 3.5                  # absolute, m
    gain: float = 1.0                      # 1/s on the slot-tracking error
    offset_step: float = math.pi / 2.0     # slot phase spacing between agents

    def _slot_angle(self, agent: int, t: float) -> float:
        return agent * self.offset_step + (self.speed / self.radius) * t

    def action(self, world: WorldState, agent: int) -> Action:
        cfg = world.config
        mav = world.mavs[agent]
        person = world.person
        theta = self._slot_angle(agent, world.time)
        slot = np.array([person.root[0] + self.radius * math.cos(theta),
                         person.root[1] + self.radius * math.sin(theta),
                         self.altitude])
        # feedforward: the slot moves with the person and along the circle
        feedforward = np.array([person.velocity[0] - self.speed * math.sin(theta),
                                person.velocity[1] + self.speed * math.cos(theta),
                                0.0])
        v_world = feedforward + self.gain * (slot - mav.position)
        velocity = np.clip(_to_ego(v_world, mav.yaw), -cfg.v_max, cfg.v_max)
        return Action(velocity=velocity,
                      yaw_rate=_face_person(mav, person.root, cfg.dt, cfg.omega_max))

    def spawn_position(self, person_root: np.ndarray, agent: int) -> np.ndarray:
        angle = self._slot_angle(agent, 0.0)
        return np.array([person_root[0] + self.radius * math.cos(angle),
                         person_root[1] + self.radius * math.sin(angle),
                         self.altitude])


@dataclass(frozen=True)
class FrontalStrategy:
    """Hold station ahead of the person along their heading, facing them."""

    distance: float = 5.0
    altitude: float = 3.5
    gain: float = 1.0

    def _target(self, world: WorldState) -> np.ndarray:
        person = world.person
        return np.array([person.root[0] + self.distance * math.cos(person.yaw),
                         person.root[1] + self.distance * math.sin(person.yaw),
                         self.altitude])

    def action(self, world: WorldState, agent: int) -> Action:
        cfg = world.config
        mav = world.mavs[agent]
        v_world = self.gain * (self._target(world) - mav.position)
        velocity = np.clip(_to_ego(v_world, mav.yaw), -cfg.v_max, cfg.v_max)
        return Action(velocity=velocity,
                      yaw_rate=_face_person(mav, world.person.root, cfg.dt, cfg.omega_max))

    def spawn_position(self, person_root: np.ndarray, agent: int, person_yaw: float = 0.0,
                       offset_step: float = math.pi / 6.0) -> np.ndarray:
        angle = person_yaw + agent * offset_step
        return np.array([person_root[0] + self.distance * math.cos(angle),
                         person_root[1] + self.distance * math.sin(angle),
                         self.altitude])


def baseline_orbit(world: WorldState, agent: int) -> Action:
    """Orbiting strategy with default parameters."""
    return OrbitStrategy().action(world, agent)


def baseline_frontal(world: WorldState, agent: int) -> Action:
    """Frontal-view strategy with default parameters."""
    return FrontalStrategy().action(world, agent)


STRATEGIES = {"orbit": OrbitStrategy, "frontal": FrontalStrategy}


def make_strategy(name: str, **kwargs):
    try:
        return STRATEGIES[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; expected one of {sorted(STRATEGIES)}") from None
