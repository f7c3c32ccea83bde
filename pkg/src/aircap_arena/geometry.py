"""Pure geometric kernel: yaw rotations, camera frames, pinhole projection,
bounding boxes and two-view least-squares triangulation.

Coordinate conventions (fixed here, inherited by every other module):

  World frame (right-handed):  x/y horizontal, z up.
  Body frame of a MAV:         x forward (heading), y left, z up.  The body
                               frame is the world frame rotated by the MAV
                               yaw about world z; roll and pitch are zero.
  Camera frame (standard CV):  +z along the optical axis, +x right in the
                               image, +y down.  The camera is rigidly
                               mounted on the body, its optical axis pitched
                               down by ``pitch_cam`` below the body x-axis.
  Image frame:                 u right, v down, origin at the top-left,
                               units pixels.

All functions here are stateless and safe to call from any number of
workers concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry

Z_NEAR = 0.01         # meters in front of the pinhole below which a point is invisible
COND_LIMIT = 1e10     # condition-number guard for the triangulation normal equations
PARALLEL_TOL = 1e-8   # minimum sine of the angle between the two viewing rays

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi] using the exact IEEE remainder reduction."""
    wrapped = math.remainder(angle, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus the fixed downward mount pitch."""

    focal_px: float = 400.0
    principal_point: tuple[float, float] = (320.0, 240.0)
    image_size: tuple[float, float] = (640.0, 480.0)
    pitch_cam: float = math.pi / 4.0

    def __post_init__(self):
        u0, v0 = self.principal_point
        w, h = self.image_size
        if not self.focal_px > 0:
            raise ValueError(f"focal_px must be positive, got {self.focal_px}")
        if not (0 < u0 < w and 0 < v0 < h):
            raise ValueError(f"principal point {self.principal_point} outside image {self.image_size}")
        if not -math.pi / 2 < self.pitch_cam < math.pi / 2:
            raise ValueError(f"pitch_cam must lie in (-pi/2, pi/2), got {self.pitch_cam}")


@dataclass(frozen=True)
class CameraPose:
    """Position and yaw of a camera carrier.  MavState exposes the same attributes."""

    position: np.ndarray
    yaw: float


@dataclass(frozen=True)
class PixelDetection:
    uv: np.ndarray        # (2,) pixels
    visible: bool


@dataclass(frozen=True)
class JointDetections:
    """Pixel detections for all 14 skeleton joints of one view."""

    uv: np.ndarray        # (14, 2) pixels
    visible: np.ndarray   # (14,) bool

    def __getitem__(self, j: int) -> PixelDetection:
        return PixelDetection(uv=self.uv[j], visible=bool(self.visible[j]))

    @property
    def any_visible(self) -> bool:
        return bool(self.visible.any())


@dataclass(frozen=True)
class BoundingBox:
    min_uv: np.ndarray    # (2,) pixels
    max_uv: np.ndarray    # (2,) pixels

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min_uv + self.max_uv)


def rotation_yaw(phi: float) -> np.ndarray:
    """Rotation about the world z-axis taking ego-frame vectors to the world frame."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def body_to_camera_matrix(pitch_cam: float) -> np.ndarray:
    """Rows are the camera axes expressed in the body frame.

    With zero pitch the optical axis is the body x-axis, image-right is
    body -y and image-down is body -z; pitching rotates the optical axis
    down by ``pitch_cam`` about the body y-axis.
    """
    c, s = math.cos(pitch_cam), math.sin(pitch_cam)
    return np.array([
        [0.0, -1.0, 0.0],
        [-s, 0.0, -c],
        [c, 0.0, -s],
    ])


def world_to_camera_matrix(yaw: float, pitch_cam: float) -> np.ndarray:
    """Matrix taking world-frame direction vectors into the camera frame."""
    return body_to_camera_matrix(pitch_cam) @ rotation_yaw(yaw).T


def world_to_camera(point_w: np.ndarray, mav, cam: CameraModel) -> np.ndarray:
    """Transform a world point into the camera frame of a MAV-mounted camera."""
    rot = world_to_camera_matrix(mav.yaw, cam.pitch_cam)
    return rot @ (np.asarray(point_w, dtype=float) - np.asarray(mav.position, dtype=float))


def project(point_c: np.ndarray, cam: CameraModel) -> PixelDetection:
    """Pinhole projection of a camera-frame point; invisibility is data, not an error."""
    uv, vis = project_points(np.asarray(point_c, dtype=float).reshape(1, 3), cam)
    return PixelDetection(uv=uv[0], visible=bool(vis[0]))


def project_points(points_c: np.ndarray, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized pinhole projection.

    Returns (uv (N,2), visible (N,)).  Points with depth <= Z_NEAR or a pixel
    outside [0,W]x[0,H] are flagged invisible; their uv entries are computed
    with a guarded depth and should not be consumed.
    """
    points_c = np.asarray(points_c, dtype=float)
    z = points_c[:, 2]
    in_front = z > Z_NEAR
    z_safe = np.where(in_front, z, 1.0)
    u0, v0 = cam.principal_point
    u = u0 + cam.focal_px * points_c[:, 0] / z_safe
    v = v0 + cam.focal_px * points_c[:, 1] / z_safe
    w, h = cam.image_size
    in_image = (u >= 0.0) & (u <= w) & (v >= 0.0) & (v <= h)
    uv = np.stack([u, v], axis=1)
    return uv, in_front & in_image


def project_skeleton(person, mav, cam: CameraModel) -> tuple[JointDetections, BoundingBox | None]:
    """Project all 14 joints of a person and the axis-aligned hull of the visible ones.

    Returns (detections, bbox); bbox is None when no joint is visible.
    """
    rot = world_to_camera_matrix(mav.yaw, cam.pitch_cam)
    joints_c = (np.asarray(person.joints, dtype=float) - np.asarray(mav.position, dtype=float)) @ rot.T
    uv, visible = project_points(joints_c, cam)
    dets = JointDetections(uv=uv, visible=visible)
    if not visible.any():
        return dets, None
    vis_uv = uv[visible]
    return dets, BoundingBox(min_uv=vis_uv.min(axis=0), max_uv=vis_uv.max(axis=0))


def _camera_pair(cams) -> tuple[CameraModel, CameraModel]:
    if isinstance(cams, CameraModel):
        return cams, cams
    cam_a, cam_b = cams
    return cam_a, cam_b


def _ray_world(uv: np.ndarray, pose, cam: CameraModel) -> np.ndarray:
    """Unit viewing ray in the world frame through a pixel."""
    u0, v0 = cam.principal_point
    ray_c = np.array([(uv[0] - u0) / cam.focal_px, (uv[1] - v0) / cam.focal_px, 1.0])
    ray_w = world_to_camera_matrix(pose.yaw, cam.pitch_cam).T @ ray_c
    return ray_w / np.linalg.norm(ray_w)


def _triangulation_system(uv_a, uv_b, pose_a, pose_b, cam_a, cam_b):
    """Stack the 4x3 linear systems for N corresponding pixel pairs.

    Each view contributes two rows of the classic least-squares constraint
    x' (r3 . p + t3) = r1 . p + t1 (and likewise for y'), with [r|t] the
    world-to-camera transform.  Returns (A (N,4,3), b (N,4)).
    """
    n = uv_a.shape[0]
    a_mat = np.empty((n, 4, 3))
    b_vec = np.empty((n, 4))
    for row0, (uv, pose, cam) in enumerate([(uv_a, pose_a, cam_a), (uv_b, pose_b, cam_b)]):
        rot = world_to_camera_matrix(pose.yaw, cam.pitch_cam)
        trans = -rot @ np.asarray(pose.position, dtype=float)
        u0, v0 = cam.principal_point
        xn = (uv[:, 0] - u0) / cam.focal_px
        yn = (uv[:, 1] - v0) / cam.focal_px
        a_mat[:, 2 * row0, :] = xn[:, None] * rot[2] - rot[0]
        a_mat[:, 2 * row0 + 1, :] = yn[:, None] * rot[2] - rot[1]
        b_vec[:, 2 * row0] = trans[0] - xn * trans[2]
        b_vec[:, 2 * row0 + 1] = trans[1] - yn * trans[2]
    return a_mat, b_vec


def _solve_batch(a_mat: np.ndarray, b_vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve the stacked normal equations; returns (points (N,3), ok (N,))."""
    ata = np.einsum("nij,nik->njk", a_mat, a_mat)
    atb = np.einsum("nij,ni->nj", a_mat, b_vec)
    conds = np.linalg.cond(ata)
    ok = np.isfinite(conds) & (conds < COND_LIMIT)
    points = np.full((a_mat.shape[0], 3), np.nan)
    if ok.any():
        points[ok] = np.linalg.solve(ata[ok], atb[ok][..., None])[..., 0]
    return points, ok


def triangulate_point(det_a: PixelDetection, pose_a, det_b: PixelDetection, pose_b, cams) -> np.ndarray:
    """Two-view linear least-squares triangulation of a single point.

    Raises DegenerateGeometry when the camera centers coincide, the viewing
    rays are parallel within tolerance, or the normal equations are
    ill-conditioned.
    """
    if not (det_a.visible and det_b.visible):
        raise ValueError("both detections must be visible to triangulate")
    cam_a, cam_b = _camera_pair(cams)
    center_a = np.asarray(pose_a.position, dtype=float)
    center_b = np.asarray(pose_b.position, dtype=float)
    if np.linalg.norm(center_a - center_b) < 1e-9:
        raise DegenerateGeometry("camera centers coincide")
    ray_a = _ray_world(det_a.uv, pose_a, cam_a)
    ray_b = _ray_world(det_b.uv, pose_b, cam_b)
    if np.linalg.norm(np.cross(ray_a, ray_b)) < PARALLEL_TOL:
        raise DegenerateGeometry("viewing rays are parallel")
    a_mat, b_vec = _triangulation_system(
        det_a.uv.reshape(1, 2), det_b.uv.reshape(1, 2), pose_a, pose_b, cam_a, cam_b)
    points, ok = _solve_batch(a_mat, b_vec)
    if not ok[0]:
        raise DegenerateGeometry("normal equations ill-conditioned")
    return points[0]


def triangulate_skeleton(dets_a: JointDetections, dets_b: JointDetections,
                         poses, cams) -> tuple[np.ndarray, np.ndarray]:
    """Triangulate all 14 joints seen in two views.

    A joint is valid iff it is visible in both views and its linear system is
    well conditioned.  Coincident camera centers raise DegenerateGeometry.
    Returns (joints (14,3) with NaN rows where invalid, valid (14,) bool).
    """
    pose_a, pose_b = poses
    cam_a, cam_b = _camera_pair(cams)
    center_a = np.asarray(pose_a.position, dtype=float)
    center_b = np.asarray(pose_b.position, dtype=float)
    if np.linalg.norm(center_a - center_b) < 1e-9:
        raise DegenerateGeometry("camera centers coincide")
    both = dets_a.visible & dets_b.visible
    n = dets_a.uv.shape[0]
    joints = np.full((n, 3), np.nan)
    valid = np.zeros(n, dtype=bool)
    if both.any():
        a_mat, b_vec = _triangulation_system(
            dets_a.uv[both], dets_b.uv[both], pose_a, pose_b, cam_a, cam_b)
        points, ok = _solve_batch(a_mat, b_vec)
        idx = np.flatnonzero(both)
        joints[idx[ok]] = points[ok]
        valid[idx[ok]] = True
    return joints, valid
