"""Reward components and the per-network-variant composition table.

All components are pure functions of their inputs and a RewardConfig.  The
tanh-shaped accuracy rewards live in (0, 1]; collision terms are piecewise
with boundaries resolved to the non-penalizing branch; estimator failures
(person invisible, no valid joints) yield 0 rather than an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .actor import JOINT_NAMES, NUM_JOINTS
from .errors import VariantMismatch
from .geometry import BoundingBox, CameraModel

VARIANTS = ("1.1", "1.2", "1.3", "1.4", "2.1", "2.2", "2.3", "2.4")

# Components summed per network variant; the workspace penalty is appended
# whenever the caller reports a violation flag.
VARIANT_COMPONENTS = {
    "1.1": ("center",),
    "1.2": ("spin",),
    "1.3": ("wspin",),
    "1.4": ("center", "wspin"),
    "2.1": ("center", "col", "triag"),
    "2.2": ("center", "col", "mhmr"),
    "2.3": ("center", "concol", "mhmr"),
    "2.4": ("center", "mhmr"),
}

# Kinematic-tree depth from the pelvis, used for the default joint weights:
# outward joints move more erratically and are penalized more.
_JOINT_DEPTH = {
    "head": 3, "neck": 2,
    "left_shoulder": 2, "right_shoulder": 2,
    "left_elbow": 3, "right_elbow": 3,
    "left_wrist": 4, "right_wrist": 4,
    "left_hip": 1, "right_hip": 1,
    "left_knee": 2, "right_knee": 2,
    "left_ankle": 4, "right_ankle": 4,
}


def default_joint_weights() -> np.ndarray:
    depths = np.array([_JOINT_DEPTH[name] for name in JOINT_NAMES], dtype=float)
    return depths / depths.sum()


@dataclass(frozen=True)
class RewardConfig:
    c1: float = 0.01                  # 1/pixels, centering
    c2: float = 5.0                   # 1/meters, monocular accuracy
    c3: float = 5.0                   # 1/meters, triangulation
    c4: float = 5.0                   # 1/meters, multi-view accuracy
    joint_weights: np.ndarray = field(default_factory=default_joint_weights)
    x_thresh: float = 3.0             # meters, binary collision threshold
    d_lthresh: float = 1.0            # meters, potential-field inner radius
    d_hthresh: float = 20.0           # meters, formation outer radius
    k_workspace: float = -0.1
    workspace_penalty: bool = False   # add the workspace term to composed training rewards
    normalize_total: bool = False     # clamp the composed total to [-1, 1]
    eq8_verbatim: bool = False        # reproduce the printed (inverted) collision inequality

    def __post_init__(self):
        w = np.asarray(self.joint_weights, dtype=float)
        if w.shape != (NUM_JOINTS,):
            raise ValueError(f"joint_weights must have shape ({NUM_JOINTS},), got {w.shape}")
        if not np.all(w > 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("joint_weights must be positive and sum to 1")
        if not self.d_lthresh < self.d_hthresh:
            raise ValueError("d_lthresh must be below d_hthresh")
        if min(self.c1, self.c2, self.c3, self.c4) <= 0:
            raise ValueError("weighting constants c1..c4 must be positive")


@dataclass(frozen=True)
class RewardInputs:
    """Everything a variant may need; leave fields None when not applicable."""

    bbox: BoundingBox | None = None
    camera: CameraModel | None = None
    mono_joints: np.ndarray | None = None      # (14,3) monocular estimate
    mono_valid: bool = False
    multi_joints: np.ndarray | None = None     # (14,3) multi-view estimate
    multi_valid: np.ndarray | None = None      # (14,) bool
    truth_joints: np.ndarray | None = None     # (14,3) ground truth
    neighbor_distance: float | None = None
    workspace_violated: bool | None = None
    has_multi_inputs: bool = False             # set when neighbor data was supplied


@dataclass
class RewardBreakdown:
    """Named components (absent ones are None) plus the composed scalar."""

    center: float | None = None
    spin: float | None = None
    wspin: float | None = None
    col: float | None = None
    triag: float | None = None
    mhmr: float | None = None
    concol: float | None = None
    workspace: float | None = None
    total: float = 0.0

    def components(self) -> dict[str, float]:
        names = ("center", "spin", "wspin", "col", "triag", "mhmr", "concol", "workspace")
        return {n: getattr(self, n) for n in names if getattr(self, n) is not None}


def r_center(bbox: BoundingBox | None, cam: CameraModel, cfg: RewardConfig) -> float:
    """1 - tanh(c1 * pixel distance of the box center from the image center); 0 if invisible."""
    if bbox is None:
        return 0.0
    image_center = np.array([cam.principal_point[0], cam.principal_point[1]])
    d_px = float(np.linalg.norm(bbox.center - image_center))
    return 1.0 - math.tanh(cfg.c1 * d_px)


def _joint_errors(estimate: np.ndarray, truth: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(estimate, dtype=float) - np.asarray(truth, dtype=float), axis=1)


def r_spin(joints: np.ndarray | None, valid: bool, truth: np.ndarray, cfg: RewardConfig) -> float:
    """Monocular accuracy reward over the plain mean joint error."""
    if not valid or joints is None:
        return 0.0
    d_j = float(_joint_errors(joints, truth).mean())
    return 1.0 - math.tanh(cfg.c2 * d_j)


def r_wspin(joints: np.ndarray | None, valid: bool, truth: np.ndarray, cfg: RewardConfig) -> float:
    """Weighted variant of r_spin.

    The error scalar keeps the 1/14 factor alongside weights that sum to 1,
    matching the published definition verbatim.
    """
    if not valid or joints is None:
        return 0.0
    errors = _joint_errors(joints, truth)
    d_w = float((cfg.joint_weights * errors).sum() / NUM_JOINTS)
    return 1.0 - math.tanh(cfg.c2 * d_w)


def r_col(dist: float, cfg: RewardConfig) -> float:
    """Binary separation reward: penalize closing below x_thresh.

    The published inequality is inverted relative to its stated intent; the
    corrected form is the default and eq8_verbatim reproduces the printed one.
    """
    if cfg.eq8_verbatim:
        return -1.0 if dist >= cfg.x_thresh else 0.2
    return -1.0 if dist < cfg.x_thresh else 0.2


def r_triag(joints: np.ndarray | None, valid: np.ndarray | None,
            truth: np.ndarray, cfg: RewardConfig) -> float:
    """Triangulation accuracy over the mean error of the valid joints."""
    if joints is None or valid is None or not np.any(valid):
        return 0.0
    d_triag = float(_joint_errors(joints[valid], truth[valid]).mean())
    return 1.0 - math.tanh(cfg.c3 * d_triag)


def r_mhmr(joints: np.ndarray | None, valid: np.ndarray | None,
           truth: np.ndarray, cfg: RewardConfig) -> float:
    """Multi-view accuracy with the same weighted error form as r_wspin."""
    if joints is None or valid is None or not np.any(valid):
        return 0.0
    errors = _joint_errors(joints[valid], truth[valid])
    d_mhmr = float((cfg.joint_weights[valid] * errors).sum() / NUM_JOINTS)
    return 1.0 - math.tanh(cfg.c4 * d_mhmr)


def v_pot(dist: float, cfg: RewardConfig) -> float:
    """Repulsive potential, zero at d_lthresh and clamped to 1 near contact."""
    ratio = cfg.d_lthresh / max(dist, 1e-6)
    return min(1.0, max(0.0, ratio * ratio - 1.0))


def r_concol(dist: float, cfg: RewardConfig) -> float:
    """Continuous collision reward: potential penalty when too close, -1 when too far."""
    if dist < cfg.d_lthresh:
        return -v_pot(dist, cfg)
    if dist <= cfg.d_hthresh:
        return 0.2
    return -1.0


def r_workspace(violated: bool, cfg: RewardConfig) -> float:
    return cfg.k_workspace if violated else 0.0


def compose(variant: str, inputs: RewardInputs, cfg: RewardConfig) -> RewardBreakdown:
    """Sum the components of one network variant into a RewardBreakdown.

    Single-agent variants reject neighbor data and multi-agent variants
    require it; the workspace penalty joins the sum whenever the violation
    flag is supplied.
    """
    if variant not in VARIANT_COMPONENTS:
        raise VariantMismatch(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    names = VARIANT_COMPONENTS[variant]
    multi = variant.startswith("2")
    if not multi and (inputs.has_multi_inputs or inputs.neighbor_distance is not None
                      or inputs.multi_joints is not None):
        raise VariantMismatch(f"variant {variant} is single-agent but neighbor inputs were supplied")
    breakdown = RewardBreakdown()
    for name in names:
        if name == "center":
            if inputs.camera is None:
                raise VariantMismatch(f"variant {variant} needs camera + bounding box inputs")
            value = r_center(inputs.bbox, inputs.camera, cfg)
        elif name == "spin":
            value = r_spin(inputs.mono_joints, inputs.mono_valid, inputs.truth_joints, cfg)
        elif name == "wspin":
            value = r_wspin(inputs.mono_joints, inputs.mono_valid, inputs.truth_joints, cfg)
        elif name in ("col", "concol"):
            if inputs.neighbor_distance is None:
                raise VariantMismatch(f"variant {variant} needs the neighbor distance")
            value = (r_col if name == "col" else r_concol)(inputs.neighbor_distance, cfg)
        else:  # triag / mhmr
            if inputs.multi_joints is None and not inputs.has_multi_inputs:
                raise VariantMismatch(f"variant {variant} needs multi-view inputs")
            value = (r_triag if name == "triag" else r_mhmr)(
                inputs.multi_joints, inputs.multi_valid, inputs.truth_joints, cfg)
        setattr(breakdown, name, value)
    if inputs.workspace_violated is not None:
        breakdown.workspace = r_workspace(inputs.workspace_violated, cfg)
    total = sum(breakdown.components().values())
    if cfg.normalize_total:
        total = max(-1.0, min(1.0, total))
    breakdown.total = total
    return breakdown
