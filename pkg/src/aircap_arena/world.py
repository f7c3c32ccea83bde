"""Episode dynamics: kinematic MAVs with first-order waypoint tracking, the
walking subject, workspace bounds, deterministic stepping and replay logs.

A WorldState instance is single-threaded; independent instances (one per
rollout worker or evaluation run) can run concurrently.  All randomness
flows through the state's own generator, so identical (config, seed) pairs
produce bit-identical trajectories.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .actor import ActorParams, PersonState, SkeletonTemplate, actor_step, spawn_person
from .errors import ConfigError, OutOfBoundsAction
from .geometry import CameraModel, project_skeleton, rotation_yaw, wrap_angle

REPLAY_VERSION = 1
_SPAWN_MAX_TRIES = 1000
_BOUNDS_SLACK = 1e-9  # tolerance when validating action components


@dataclass
class MavState:
    """Kinematic point-yaw agent with a rigidly mounted camera (roll/pitch are zero)."""

    position: np.ndarray       # (3,) meters
    yaw: float                 # wrapped to (-pi, pi]
    velocity: np.ndarray       # (3,) m/s
    yaw_rate: float            # rad/s
    camera: CameraModel

    def copy(self) -> "MavState":
        return MavState(self.position.copy(), self.yaw, self.velocity.copy(),
                        self.yaw_rate, self.camera)


@dataclass(frozen=True)
class Action:
    """Egocentric linear velocity command plus yaw rate."""

    velocity: np.ndarray       # (3,) m/s in the agent body frame
    yaw_rate: float            # rad/s

    @staticmethod
    def from_array(arr: np.ndarray) -> "Action":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (4,):
            raise ValueError(f"action array must have shape (4,), got {arr.shape}")
        return Action(velocity=arr[:3].copy(), yaw_rate=float(arr[3]))

    def to_array(self) -> np.ndarray:
        return np.array([self.velocity[0], self.velocity[1], self.velocity[2], self.yaw_rate])


@dataclass(frozen=True)
class WaypointCommand:
    position: np.ndarray       # (3,) meters, world frame
    yaw: float


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned flight volume; the subject walks on the ground inside the x/y footprint."""

    x_bounds: tuple[float, float] = (-12.0, 12.0)
    y_bounds: tuple[float, float] = (-12.0, 12.0)
    alt_bounds: tuple[float, float] = (1.0, 8.0)

    def __post_init__(self):
        for name, (lo, hi) in (("x", self.x_bounds), ("y", self.y_bounds), ("alt", self.alt_bounds)):
            if not lo < hi:
                raise ConfigError(f"workspace {name} bounds must satisfy min < max, got ({lo}, {hi})")

    @property
    def low(self) -> np.ndarray:
        return np.array([self.x_bounds[0], self.y_bounds[0], self.alt_bounds[0]])

    @property
    def high(self) -> np.ndarray:
        return np.array([self.x_bounds[1], self.y_bounds[1], self.alt_bounds[1]])

    def interior_xy(self, margin: float) -> np.ndarray:
        box = np.array([
            [self.x_bounds[0] + margin, self.x_bounds[1] - margin],
            [self.y_bounds[0] + margin, self.y_bounds[1] - margin],
        ])
        if (box[:, 1] <= box[:, 0]).any():
            raise ConfigError(f"workspace too small for interior margin {margin}")
        return box


@dataclass(frozen=True)
class WorldConfig:
    dt: float = 0.25
    t_episode: int = 512
    num_mavs: int = 2
    v_max: float = 2.0            # per-axis, m/s
    omega_max: float = 1.0        # rad/s
    k_p: float = 1.0              # first-order tracker gain
    spawn_separation: float = 6.0  # minimum pairwise MAV spawn distance (2 * x_thresh)
    workspace: Workspace = field(default_factory=Workspace)
    camera: CameraModel = field(default_factory=CameraModel)
    skeleton: SkeletonTemplate = field(default_factory=SkeletonTemplate)
    actor: ActorParams = field(default_factory=ActorParams)

    def __post_init__(self):
        if self.dt <= 0 or self.t_episode <= 0 or self.num_mavs < 1:
            raise ConfigError("dt, t_episode and num_mavs must be positive")
        if self.v_max <= 0 or self.omega_max <= 0 or self.k_p <= 0:
            raise ConfigError("v_max, omega_max and k_p must be positive")


@dataclass
class StepEvents:
    """Per-step diagnostics raised by the environment transition."""

    workspace_violation: np.ndarray    # (K,) bool
    inter_mav_distance: float | None   # None when K == 1
    mav_person_distance: np.ndarray    # (K,) meters
    done: bool


@dataclass
class WorldState:
    config: WorldConfig
    mavs: list[MavState]
    person: PersonState
    step_index: int
    seed: int
    rng: np.random.Generator
    scripted_person: list[PersonState] | None = None

    @property
    def time(self) -> float:
        return self.step_index * self.config.dt

    def copy(self) -> "WorldState":
        clone = WorldState(
            config=self.config,
            mavs=[m.copy() for m in self.mavs],
            person=self.person.copy(),
            step_index=self.step_index,
            seed=self.seed,
            rng=np.random.default_rng(),
            scripted_person=self.scripted_person,
        )
        clone.rng.bit_generator.state = self.rng.bit_generator.state
        return clone


def action_to_waypoint(action: Action, mav: MavState, dt: float,
                       v_max: float, omega_max: float) -> WaypointCommand:
    """Map an egocentric velocity command to a world-frame waypoint."""
    vel = np.asarray(action.velocity, dtype=float)
    if not np.all(np.isfinite(vel)) or not math.isfinite(action.yaw_rate):
        raise OutOfBoundsAction("action contains non-finite components")
    if np.any(np.abs(vel) > v_max + _BOUNDS_SLACK):
        raise OutOfBoundsAction(f"velocity {vel} exceeds per-axis bound {v_max}")
    if abs(action.yaw_rate) > omega_max + _BOUNDS_SLACK:
        raise OutOfBoundsAction(f"yaw rate {action.yaw_rate} exceeds bound {omega_max}")
    position = mav.position + rotation_yaw(mav.yaw) @ vel * dt
    return WaypointCommand(position=position, yaw=wrap_angle(mav.yaw + action.yaw_rate * dt))


def track_waypoint(mav: MavState, wp: WaypointCommand, dt: float,
                   v_max: float, omega_max: float, k_p: float = 1.0) -> MavState:
    """First-order tracker standing in for the low-level flight controller."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    velocity = np.clip(k_p * (wp.position - mav.position) / dt, -v_max, v_max)
    position = mav.position + velocity * dt
    yaw_rate = max(-omega_max, min(omega_max, k_p * wrap_angle(wp.yaw - mav.yaw) / dt))
    yaw = wrap_angle(mav.yaw + yaw_rate * dt)
    return MavState(position=position, yaw=yaw, velocity=velocity,
                    yaw_rate=yaw_rate, camera=mav.camera)


def _clamp_to_workspace(mav: MavState, ws: Workspace) -> tuple[MavState, bool]:
    clamped = np.minimum(np.maximum(mav.position, ws.low), ws.high)
    if np.array_equal(clamped, mav.position):
        return mav, False
    return MavState(position=clamped, yaw=mav.yaw, velocity=mav.velocity,
                    yaw_rate=mav.yaw_rate, camera=mav.camera), True


def step_env(state: WorldState, actions: list[Action]) -> tuple[WorldState, StepEvents]:
    """Apply one action per MAV and advance the subject by one step.

    Workspace violations clamp the offending MAV to the boundary and are
    reported as events; episodes never terminate early.
    """
    cfg = state.config
    if len(actions) != cfg.num_mavs:
        raise ValueError(f"expected {cfg.num_mavs} actions, got {len(actions)}")
    new_mavs = []
    violations = np.zeros(cfg.num_mavs, dtype=bool)
    for i, (mav, act) in enumerate(zip(state.mavs, actions)):
        wp = action_to_waypoint(act, mav, cfg.dt, cfg.v_max, cfg.omega_max)
        moved = track_waypoint(mav, wp, cfg.dt, cfg.v_max, cfg.omega_max, cfg.k_p)
        moved, violations[i] = _clamp_to_workspace(moved, cfg.workspace)
        new_mavs.append(moved)

    next_step = state.step_index + 1
    if state.scripted_person is not None:
        idx = min(next_step, len(state.scripted_person) - 1)
        person = state.scripted_person[idx].copy()
    else:
        person = actor_step(state.person, cfg.dt, state.rng, cfg.skeleton,
                            cfg.actor, cfg.workspace.interior_xy(cfg.actor.margin))

    new_state = WorldState(config=cfg, mavs=new_mavs, person=person,
                           step_index=next_step, seed=state.seed, rng=state.rng,
                           scripted_person=state.scripted_person)
    inter = None
    if cfg.num_mavs >= 2:
        inter = float(np.linalg.norm(new_mavs[0].position - new_mavs[1].position))
    person_dist = np.array([float(np.linalg.norm(m.position - person.root)) for m in new_mavs])
    events = StepEvents(workspace_violation=violations, inter_mav_distance=inter,
                        mav_person_distance=person_dist,
                        done=next_step >= cfg.t_episode)
    return new_state, events


def reset_episode(config: WorldConfig, seed: int,
                  scripted_person: list[PersonState] | None = None) -> WorldState:
    """Spawn the subject near the workspace center and MAVs around it.

    MAV positions are uniform in the flight volume subject to a pairwise
    separation of at least `spawn_separation`; every MAV yaw faces the
    subject, and the draw is rejected until at least one camera sees it.
    When a scripted person trajectory is supplied it replaces the walk
    generator and the spawn check runs against its first state.
    """
    ws = config.workspace
    diag = float(np.linalg.norm(ws.high[:2] - ws.low[:2]))
    if config.num_mavs >= 2 and diag < config.spawn_separation:
        raise ConfigError(
            f"workspace footprint diagonal {diag:.2f} m cannot fit spawn separation "
            f"{config.spawn_separation} m")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    interior = ws.interior_xy(config.actor.margin)
    if scripted_person is not None:
        person = scripted_person[0].copy()
    else:
        person = spawn_person(config.skeleton, config.actor, interior, rng)

    for _ in range(_SPAWN_MAX_TRIES):
        positions = rng.uniform(ws.low, ws.high, size=(config.num_mavs, 3))
        if config.num_mavs >= 2:
            deltas = positions[:, None, :] - positions[None, :, :]
            dists = np.linalg.norm(deltas, axis=-1)
            iu = np.triu_indices(config.num_mavs, k=1)
            if np.any(dists[iu] < config.spawn_separation):
                continue
        mavs = []
        for pos in positions:
            bearing = math.atan2(person.root[1] - pos[1], person.root[0] - pos[0])
            mavs.append(MavState(position=pos, yaw=wrap_angle(bearing),
                                 velocity=np.zeros(3), yaw_rate=0.0,
                                 camera=config.camera))
        if any(project_skeleton(person, m, m.camera)[1] is not None for m in mavs):
            return WorldState(config=config, mavs=mavs, person=person,
                              step_index=0, seed=seed, rng=rng,
                              scripted_person=scripted_person)
    raise ConfigError("could not satisfy spawn constraints; workspace too small or "
                      "separation too large")


# --- replay logging ---------------------------------------------------------

def _mav_record(mav: MavState) -> dict:
    return {"position": mav.position.tolist(), "yaw": mav.yaw,
            "velocity": mav.velocity.tolist(), "yaw_rate": mav.yaw_rate}


def _person_record(person: PersonState) -> dict:
    return {"root": person.root.tolist(), "yaw": person.yaw,
            "velocity": person.velocity.tolist(), "joints": person.joints.tolist()}


def replay_record(state: WorldState, actions: list[Action] | None,
                  events: StepEvents | None) -> dict:
    """One newline-delimited JSON record; floats round-trip bit-exactly via repr."""
    rec = {
        "step": state.step_index,
        "mavs": [_mav_record(m) for m in state.mavs],
        "person": _person_record(state.person),
    }
    if actions is not None:
        rec["actions"] = [a.to_array().tolist() for a in actions]
    if events is not None:
        rec["events"] = {
            "workspace_violation": events.workspace_violation.tolist(),
            "inter_mav_distance": events.inter_mav_distance,
            "mav_person_distance": events.mav_person_distance.tolist(),
            "done": events.done,
        }
    return rec


class ReplayWriter:
    """Writes a header line followed by one JSON record per step."""

    def __init__(self, path, config: WorldConfig, seed: int):
        self._fh = open(path, "w")
        header = {"version": REPLAY_VERSION, "dt": config.dt, "num_mavs": config.num_mavs,
                  "t_episode": config.t_episode, "seed": seed}
        self._fh.write(json.dumps(header) + "\n")

    def write(self, state: WorldState, actions: list[Action] | None = None,
              events: StepEvents | None = None):
        self._fh.write(json.dumps(replay_record(state, actions, events)) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_replay(path) -> tuple[dict, list[dict]]:
    """Load a replay log; returns (header, records)."""
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or "version" not in lines[0]:
        raise ValueError(f"{path} is not a replay log")
    header = lines[0]
    if header["version"] != REPLAY_VERSION:
        raise ValueError(f"unsupported replay version {header['version']}")
    return header, lines[1:]


def person_from_record(rec: dict) -> PersonState:
    return PersonState(root=np.array(rec["root"], dtype=float), yaw=float(rec["yaw"]),
                       velocity=np.array(rec["velocity"], dtype=float),
                       joints=np.array(rec["joints"], dtype=float))


def mav_from_record(rec: dict, camera: CameraModel) -> MavState:
    return MavState(position=np.array(rec["position"], dtype=float), yaw=float(rec["yaw"]),
                    velocity=np.array(rec["velocity"], dtype=float),
                    yaw_rate=float(rec["yaw_rate"]), camera=camera)
