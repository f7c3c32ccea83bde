"""Observation vectors and the synthetic pose-estimator proxies.

The proxies stand in for the neural pose networks the rewards were designed
around: the monocular proxy produces joint estimates whose error is
depth-dominant and grows with distance; the multi-view estimate is the
noisy-detection triangulation pipeline.  Both are deterministic given a
generator, and generators are derived from (seed, step, agent) so reruns
reproduce identical noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .actor import NUM_JOINTS
from .errors import VariantMismatch
from .geometry import JointDetections, project_skeleton, triangulate_skeleton, wrap_angle
from .world import WorldState

# Sub-stream tags for derived generators, so the walk rng, the detection
# noise and the proxy noise never share a stream.
_STREAM_DETECT = 1
_STREAM_PROXY = 2


def noise_rng(seed: int, step: int, agent: int) -> np.random.Generator:
    """Generator for pixel-detection noise at one (seed, step, agent)."""
    return np.random.default_rng(np.random.SeedSequence([seed, _STREAM_DETECT, step, agent]))


def proxy_rng(seed: int, step: int, agent: int) -> np.random.Generator:
    """Generator for monocular-proxy noise at one (seed, step, agent)."""
    return np.random.default_rng(np.random.SeedSequence([seed, _STREAM_PROXY, step, agent]))


class ObsVariant(Enum):
    SINGLE = "single"            # person position, velocity and relative yaw
    MULTI = "multi"              # adds neighbor position and person yaw wrt neighbor
    MULTI_STATIC = "multi_static"  # multi without the person velocity


@dataclass(frozen=True)
class Observation:
    """Ego-frame measurement vector; absent fields are None per variant."""

    y_p: np.ndarray              # (3,) person position, ego frame
    psi_p: float                 # person body yaw relative to agent yaw
    ydot_p: np.ndarray | None    # (3,) person velocity, ego frame
    y_n: np.ndarray | None       # (3,) neighbor position, ego frame
    psi_pn: float | None         # person body yaw relative to neighbor yaw
    variant: ObsVariant

    def to_vector(self) -> np.ndarray:
        parts = [self.y_p]
        if self.ydot_p is not None:
            parts.append(self.ydot_p)
        parts.append([self.psi_p])
        if self.y_n is not None:
            parts.append(self.y_n)
            parts.append([self.psi_pn])
        return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])


def observation_dim(variant: ObsVariant) -> int:
    return {ObsVariant.SINGLE: 7, ObsVariant.MULTI: 11, ObsVariant.MULTI_STATIC: 8}[variant]


@dataclass(frozen=True)
class NoisyDetections:
    """Projected joints with additive pixel noise; uv is clamped to the image."""

    uv: np.ndarray               # (14, 2) pixels
    visible: np.ndarray          # (14,) bool
    sigma_px: float

    def as_joint_detections(self) -> JointDetections:
        return JointDetections(uv=self.uv, visible=self.visible)


@dataclass(frozen=True)
class NoiseConfig:
    sigma0_px: float = 2.0       # pixel noise inside the comfort band
    k_n: float = 1.0             # extra pixels of noise per meter outside the band
    d_lo: float = 3.0            # comfort band, meters
    d_hi: float = 8.0
    sigma_depth: float = 10.0    # monocular depth-bias scale
    sigma_lat: float = 1.0       # monocular lateral-noise scale


def _ego(vec: np.ndarray, yaw: float) -> np.ndarray:
    """Rotate a world vector into the frame of an agent with the given yaw."""
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c * vec[0] + s * vec[1], -s * vec[0] + c * vec[1], vec[2]])


def build_observation(world: WorldState, agent_index: int, variant: ObsVariant) -> Observation:
    """Assemble the ego-frame observation from simulator ground truth.

    Yaw inputs are canonicalized through wrap_angle before any arithmetic so
    headings differing by full turns produce identical observations.
    """
    k = world.config.num_mavs
    if agent_index >= k:
        raise IndexError(f"agent {agent_index} out of range for K={k}")
    if variant in (ObsVariant.MULTI, ObsVariant.MULTI_STATIC) and k < 2:
        raise VariantMismatch(f"{variant.value} observation requires K >= 2, world has K={k}")
    mav = world.mavs[agent_index]
    person = world.person
    yaw = wrap_angle(mav.yaw)
    body_yaw = wrap_angle(person.yaw)
    y_p = _ego(person.root - mav.position, yaw)
    psi_p = wrap_angle(body_yaw - yaw)
    ydot_p = None
    if variant is not ObsVariant.MULTI_STATIC:
        ydot_p = _ego(person.velocity - mav.velocity, yaw)
    y_n = None
    psi_pn = None
    if variant in (ObsVariant.MULTI, ObsVariant.MULTI_STATIC):
        neighbor = world.mavs[1 - agent_index]
        y_n = _ego(neighbor.position - mav.position, yaw)
        psi_pn = wrap_angle(body_yaw - wrap_angle(neighbor.yaw))
    return Observation(y_p=y_p, psi_p=psi_p, ydot_p=ydot_p, y_n=y_n,
                       psi_pn=psi_pn, variant=variant)


def detection_sigma(distance: float, cfg: NoiseConfig) -> float:
    """Pixel noise level: flat inside the comfort band, growing linearly outside."""
    outside = max(0.0, cfg.d_lo - distance, distance - cfg.d_hi)
    return cfg.sigma0_px * (1.0 + cfg.k_n * outside)


def detect_joints(world: WorldState, agent_index: int, noise_config: NoiseConfig,
                  rng: np.random.Generator) -> NoisyDetections:
    """Project the skeleton into one agent's camera and perturb the pixels.

    Noise is zero-mean Gaussian with a distance-dependent sigma; noisy pixels
    are clamped to the image so detections stay inside bounds.  Visibility is
    decided by the exact projection.
    """
    mav = world.mavs[agent_index]
    dets, _ = project_skeleton(world.person, mav, mav.camera)
    dist = float(np.linalg.norm(mav.position - world.person.root))
    sigma = detection_sigma(dist, noise_config)
    uv = dets.uv.copy()
    if sigma > 0.0:
        uv = uv + rng.normal(0.0, sigma, size=(NUM_JOINTS, 2))
    w, h = mav.camera.image_size
    uv[:, 0] = np.clip(uv[:, 0], 0.0, w)
    uv[:, 1] = np.clip(uv[:, 1], 0.0, h)
    return NoisyDetections(uv=uv, visible=dets.visible.copy(), sigma_px=sigma)


@dataclass(frozen=True)
class MonocularPoseEstimate:
    joints: np.ndarray           # (14, 3) meters
    valid: bool


def monocular_pose_proxy(world: WorldState, agent_index: int, rng: np.random.Generator,
                         noise_config: NoiseConfig | None = None) -> MonocularPoseEstimate:
    """Single-view joint estimate with the error structure of a monocular lifter.

    The whole skeleton is shifted along the viewing ray by a depth bias and
    each joint gets lateral noise; both scale with distance over apparent
    size, so the estimate degrades smoothly as the agent backs away.
    """
    cfg = noise_config or NoiseConfig()
    mav = world.mavs[agent_index]
    dets, bbox = project_skeleton(world.person, mav, mav.camera)
    if bbox is None:
        return MonocularPoseEstimate(joints=np.full((NUM_JOINTS, 3), np.nan), valid=False)
    height_px = max(1.0, float(bbox.max_uv[1] - bbox.min_uv[1]))
    dist = float(np.linalg.norm(world.person.root - mav.position))
    scale = dist / height_px
    ray = (world.person.root - mav.position) / max(dist, 1e-9)
    depth_bias = rng.normal(0.0, cfg.sigma_depth * scale)
    lateral = rng.normal(0.0, cfg.sigma_lat * scale, size=(NUM_JOINTS, 3))
    joints = world.person.joints + depth_bias * ray + lateral
    return MonocularPoseEstimate(joints=joints, valid=True)


def multiview_pose_estimate(world: WorldState, agent_a: int, agent_b: int,
                            noise_config: NoiseConfig,
                            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Noisy detections in two views followed by per-joint triangulation.

    Returns (joints (14,3), valid (14,)); propagates DegenerateGeometry when
    the two agents are co-located.
    """
    if world.config.num_mavs < 2:
        raise VariantMismatch("multi-view estimate requires K >= 2")
    dets_a = detect_joints(world, agent_a, noise_config, rng)
    dets_b = detect_joints(world, agent_b, noise_config, rng)
    return triangulate_skeleton(
        dets_a.as_joint_detections(), dets_b.as_joint_detections(),
        (world.mavs[agent_a], world.mavs[agent_b]),
        (world.mavs[agent_a].camera, world.mavs[agent_b].camera))
