"""Procedurally animated walking subject.

The subject is a 14-joint skeleton driven by a random-waypoint walk and a
phase-indexed sinusoidal gait.  Limbs are posed by pure rotations of
fixed-length segments, so bone lengths are conserved to machine precision
over an episode.  Joint order is fixed and shared package-wide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle

JOINT_NAMES = (
    "head", "neck",
    "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow",
    "left_wrist", "right_wrist",
    "left_hip", "right_hip",
    "left_knee", "right_knee",
    "left_ankle", "right_ankle",
)
NUM_JOINTS = len(JOINT_NAMES)

# Bone graph over JOINT_NAMES indices, used by the conservation checks.
BONE_PAIRS = (
    (1, 0),            # neck-head
    (1, 2), (1, 3),    # neck-shoulders
    (2, 4), (3, 5),    # upper arms
    (4, 6), (5, 7),    # forearms
    (8, 9),            # pelvis width
    (2, 3),            # shoulder width
    (8, 10), (9, 11),  # thighs
    (10, 12), (11, 13),  # shanks
)


@dataclass(frozen=True)
class SkeletonTemplate:
    """Segment proportions (fractions of standing height) and gait shape.

    Vertical ratios follow the classic anthropometric segment tables; gait
    amplitudes are tuned for plausible desk-scale walking.
    """

    height: float = 1.70
    hip_height_ratio: float = 0.530
    knee_height_ratio: float = 0.285
    ankle_height_ratio: float = 0.039
    shoulder_height_ratio: float = 0.818
    neck_height_ratio: float = 0.870
    head_height_ratio: float = 0.936
    hip_halfwidth_ratio: float = 0.0955
    shoulder_halfwidth_ratio: float = 0.1295
    upper_arm_ratio: float = 0.186
    forearm_ratio: float = 0.146
    leg_swing_amp: float = 0.55     # rad at full speed
    arm_swing_amp: float = 0.35     # rad at full speed
    knee_flex_amp: float = 0.60     # rad at full speed
    elbow_flex: float = 0.25        # constant forward elbow bend, rad
    full_speed: float = 1.5         # m/s at which swing amplitude saturates
    cycle_hz: float = 1.0           # gait cycles per second (two footfalls)

    @property
    def hip_height(self) -> float:
        return self.hip_height_ratio * self.height


@dataclass
class WalkPlan:
    """Random-waypoint itinerary for one episode."""

    waypoints: np.ndarray      # (n, 2) horizontal targets
    index: int
    speed: float               # current segment speed, m/s


@dataclass
class PersonState:
    """Global pose of the subject: root (pelvis center), heading, velocity and joints."""

    root: np.ndarray           # (3,) meters, z = hip height
    yaw: float                 # body heading, wrapped to (-pi, pi]
    velocity: np.ndarray       # (3,) m/s
    joints: np.ndarray         # (14, 3) meters, JOINT_NAMES order
    gait_phase: float = 0.0
    plan: WalkPlan | None = None   # None for an idle (static) subject

    def copy(self) -> "PersonState":
        plan = None
        if self.plan is not None:
            plan = WalkPlan(self.plan.waypoints.copy(), self.plan.index, self.plan.speed)
        return PersonState(self.root.copy(), self.yaw, self.velocity.copy(),
                           self.joints.copy(), self.gait_phase, plan)


@dataclass(frozen=True)
class ActorParams:
    """Walk-generator knobs; speeds in m/s, rates in rad/s, distances in meters."""

    num_waypoints: int = 8
    speed_range: tuple[float, float] = (0.3, 1.5)
    turn_rate_max: float = 1.0
    arrive_radius: float = 0.3
    margin: float = 1.0
    static: bool = False


def _sagittal(length: float, angle: float) -> np.ndarray:
    """Body-frame offset of a segment of given length swung by `angle` from straight down."""
    return np.array([length * math.sin(angle), 0.0, -length * math.cos(angle)])


def skeleton_joints(tpl: SkeletonTemplate, root: np.ndarray, yaw: float,
                    phase: float, speed: float) -> np.ndarray:
    """Forward kinematics: joint positions in the world frame.

    All limb motion is rotation of fixed-length segments in the body sagittal
    plane; the swing amplitude scales with speed and vanishes when standing.
    """
    h = tpl.height
    s = min(1.0, abs(speed) / tpl.full_speed)
    hip_hw = tpl.hip_halfwidth_ratio * h
    sh_hw = tpl.shoulder_halfwidth_ratio * h
    thigh = (tpl.hip_height_ratio - tpl.knee_height_ratio) * h
    shank = (tpl.knee_height_ratio - tpl.ankle_height_ratio) * h
    up_arm = tpl.upper_arm_ratio * h
    forearm = tpl.forearm_ratio * h
    shoulder_up = (tpl.shoulder_height_ratio - tpl.hip_height_ratio) * h
    neck_up = (tpl.neck_height_ratio - tpl.hip_height_ratio) * h
    head_up = (tpl.head_height_ratio - tpl.hip_height_ratio) * h

    body = np.empty((NUM_JOINTS, 3))
    body[1] = (0.0, 0.0, neck_up)
    body[0] = (0.0, 0.0, head_up)
    body[2] = (0.0, sh_hw, shoulder_up)
    body[3] = (0.0, -sh_hw, shoulder_up)
    body[8] = (0.0, hip_hw, 0.0)
    body[9] = (0.0, -hip_hw, 0.0)

    for side, off in ((0, 0.0), (1, math.pi)):  # 0 = left, 1 = right
        leg_angle = tpl.leg_swing_amp * s * math.sin(phase + off)
        knee_flex = tpl.knee_flex_amp * s * 0.5 * (1.0 - math.cos(phase + off))
        hip = body[8 + side]
        knee = hip + _sagittal(thigh, leg_angle)
        ankle = knee + _sagittal(shank, leg_angle - knee_flex)
        body[10 + side] = knee
        body[12 + side] = ankle

        arm_angle = tpl.arm_swing_amp * s * math.sin(phase + off + math.pi)
        shoulder = body[2 + side]
        elbow = shoulder + _sagittal(up_arm, arm_angle)
        wrist = elbow + _sagittal(forearm, arm_angle + tpl.elbow_flex)
        body[4 + side] = elbow
        body[6 + side] = wrist

    c, sn = math.cos(yaw), math.sin(yaw)
    world = np.empty_like(body)
    world[:, 0] = root[0] + c * body[:, 0] - sn * body[:, 1]
    world[:, 1] = root[1] + sn * body[:, 0] + c * body[:, 1]
    world[:, 2] = root[2] + body[:, 2]
    return world


def spawn_person(tpl: SkeletonTemplate, params: ActorParams, interior: np.ndarray,
                 rng: np.random.Generator) -> PersonState:
    """Create a subject in the central region of the walkable interior box.

    `interior` is ((x_min, x_max), (y_min, y_max)) for the walk area; the
    spawn is confined to the central 20% of it.
    """
    center = interior.mean(axis=1)
    extent = interior[:, 1] - interior[:, 0]
    xy = center + rng.uniform(-0.1, 0.1, size=2) * extent
    yaw = float(rng.uniform(-math.pi, math.pi))
    phase = float(rng.uniform(0.0, 2.0 * math.pi))
    root = np.array([xy[0], xy[1], tpl.hip_height])
    plan = None
    speed = 0.0
    if not params.static:
        waypoints = np.column_stack([
            rng.uniform(interior[0, 0], interior[0, 1], size=params.num_waypoints),
            rng.uniform(interior[1, 0], interior[1, 1], size=params.num_waypoints),
        ])
        plan = WalkPlan(waypoints=waypoints, index=0,
                        speed=float(rng.uniform(*params.speed_range)))
        speed = plan.speed
    joints = skeleton_joints(tpl, root, yaw, phase, 0.0)
    velocity = np.array([speed * math.cos(yaw), speed * math.sin(yaw), 0.0]) if plan else np.zeros(3)
    return PersonState(root=root, yaw=yaw, velocity=velocity, joints=joints,
                       gait_phase=phase, plan=plan)


def actor_step(person: PersonState, dt: float, rng: np.random.Generator,
               tpl: SkeletonTemplate, params: ActorParams,
               interior: np.ndarray) -> PersonState:
    """Advance the subject by one step.

    The gait phase advances at the fixed cycle rate; swing amplitude scales
    with the walk speed, so an idle subject only accumulates phase.  Segment
    speeds are redrawn from the rng when a waypoint is reached.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    phase = person.gait_phase + 2.0 * math.pi * tpl.cycle_hz * dt
    if person.plan is None:
        joints = skeleton_joints(tpl, person.root, person.yaw, phase, 0.0)
        return PersonState(root=person.root.copy(), yaw=person.yaw,
                           velocity=np.zeros(3), joints=joints,
                           gait_phase=phase, plan=None)

    plan = person.plan
    target = plan.waypoints[plan.index]
    to_target = target - person.root[:2]
    if float(np.linalg.norm(to_target)) < params.arrive_radius:
        plan = WalkPlan(waypoints=plan.waypoints,
                        index=(plan.index + 1) % plan.waypoints.shape[0],
                        speed=float(rng.uniform(*params.speed_range)))
        target = plan.waypoints[plan.index]
        to_target = target - person.root[:2]

    bearing = math.atan2(to_target[1], to_target[0])
    turn = wrap_angle(bearing - person.yaw)
    max_turn = params.turn_rate_max * dt
    yaw = wrap_angle(person.yaw + max(-max_turn, min(max_turn, turn)))
    velocity = np.array([plan.speed * math.cos(yaw), plan.speed * math.sin(yaw), 0.0])
    root = person.root + velocity * dt
    root[0] = min(max(root[0], interior[0, 0]), interior[0, 1])
    root[1] = min(max(root[1], interior[1, 0]), interior[1, 1])
    joints = skeleton_joints(tpl, root, yaw, phase, plan.speed)
    return PersonState(root=root, yaw=yaw, velocity=velocity, joints=joints,
                       gait_phase=phase, plan=plan)


def bone_lengths(joints: np.ndarray) -> np.ndarray:
    """Lengths of every bone in BONE_PAIRS order."""
    a = np.array([p[0] for p in BONE_PAIRS])
    b = np.array([p[1] for p in BONE_PAIRS])
    return np.linalg.norm(joints[a] - joints[b], axis=1)
