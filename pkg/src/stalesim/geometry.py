"""Rigid-body poses, ego trajectories, per-point motion compensation, pinhole projection.

Coordinate conventions used throughout the package:

    World frame (right-handed): x/y ground plane, z up, ground at z = 0.
    Ego frame: x forward, y left, z up; a pose maps ego coordinates into
        world coordinates via  X_world = R @ X_ego + t.
    Camera frame (computer vision): x right in image, y down, z along the
        optical axis into the scene.  The camera mount pose maps ego
        coordinates into camera coordinates.

All timestamps are absolute simulation seconds (double precision); there is
no clock skew between sensors, only delivery delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDepth

Timestamp = float

_ORTHO_TOL = 1e-9


def rot_z(angle: float) -> np.ndarray:
    """3x3 rotation about the world/ego z axis."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class SE3Pose:
    """Rigid transform; ``apply`` maps source-frame points into the target frame.

    The rotation must be orthonormal with determinant +1 within 1e-9.
    Construction fails loudly on a bad rotation; nothing is re-orthogonalized
    silently.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise ValueError("pose entries must be finite")
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise ValueError(f"rotation not orthonormal (|R^T R - I| = {err:.3e})")
        det = np.linalg.det(r)
        if abs(det - 1.0) > _ORTHO_TOL:
            raise ValueError(f"rotation determinant {det:.12f} != +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "SE3Pose":
        return SE3Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_yaw(yaw: float, translation=(0.0, 0.0, 0.0)) -> "SE3Pose":
        return SE3Pose(rot_z(yaw), np.asarray(translation, dtype=float))

    def compose(self, other: "SE3Pose") -> "SE3Pose":
        """Return the chained transform: apply ``other`` first, then ``self``."""
        return SE3Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "SE3Pose":
        rt = self.rotation.T
        return SE3Pose(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (N, 3) batch."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation


@dataclass(frozen=True)
class EgoTrajectory:
    """Constant world-frame velocity, constant yaw rate; closed-form poses.

    ``velocity`` is expressed in the world frame (m/s) and ``yaw_rate`` in
    rad/s about the world z axis.  Rotation about z only: roll/pitch are out
    of scope.
    """

    reference_pose: SE3Pose
    reference_time: Timestamp
    velocity: np.ndarray
    yaw_rate: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.velocity, dtype=float).reshape(3)
        object.__setattr__(self, "velocity", v)


def pose_at(traj: EgoTrajectory, t: Timestamp) -> SE3Pose:
    """World-from-ego pose at time t (exact closed form, no integrator)."""
    dt = t - traj.reference_time
    rotation = rot_z(traj.yaw_rate * dt) @ traj.reference_pose.rotation
    translation = traj.reference_pose.translation + traj.velocity * dt
    return SE3Pose(rotation, translation)


def relative_transform(traj: EgoTrajectory, t_to: Timestamp, t_from: Timestamp) -> SE3Pose:
    """Transform mapping ego-frame points at ``t_from`` into the ego frame at ``t_to``."""
    return pose_at(traj, t_to).inverse().compose(pose_at(traj, t_from))


def transform_point(pose: SE3Pose, point: np.ndarray) -> np.ndarray:
    """rotation @ point + translation."""
    return pose.apply(point)


def motion_compensate(
    points: np.ndarray,
    timestamps: np.ndarray,
    traj: EgoTrajectory,
    t_target: Timestamp,
) -> np.ndarray:
    """Re-express per-point-timestamped ego-frame points in the ego frame at ``t_target``.

    ``points`` is (N, 3), ``timestamps`` is (N,).  Points sharing a capture
    time share one rigid transform, so the transform is built once per unique
    timestamp.  Order is preserved; an empty input yields an empty output.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    times = np.asarray(timestamps, dtype=float).reshape(-1)
    if pts.shape[0] != times.shape[0]:
        raise ValueError("points and timestamps must have matching lengths")
    out = np.empty_like(pts)
    if pts.shape[0] == 0:
        return out
    unique_times, inverse = np.unique(times, return_inverse=True)
    for i, ti in enumerate(unique_times):
        transform = relative_transform(traj, t_target, float(ti))
        sel = inverse == i
        out[sel] = transform.apply(pts[sel])
    return out


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus mounting and shutter timing.

    ``mount`` maps ego-frame points into the camera frame.  ``facing_azimuth``
    is the optical-axis azimuth in the ego frame, used for phase-locked
    triggering against the spinning beam.  Row ``r`` of an image whose first
    row finished exposing at time T is captured at T + r * row_time.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    mount: SE3Pose = field(default_factory=SE3Pose.identity)
    facing_azimuth: float = 0.0
    exposure: float = 0.008
    row_time: float = 25e-6

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not 0.0 < self.row_time < 1e-3:
            raise ValueError("row time must lie in (0, 1 ms)")
        if not 5e-3 <= self.exposure <= 15e-3:
            raise ValueError("exposure must lie in [5 ms, 15 ms]")


def camera_mount(position, azimuth: float) -> SE3Pose:
    """Camera-from-ego pose for a camera at ``position`` facing ``azimuth``.

    The optical axis points along (cos a, sin a, 0) in the ego frame, image-x
    points to the right of that direction, image-y points down.
    """
    c, s = math.cos(azimuth), math.sin(azimuth)
    # Columns of ego-from-camera: camera x, y, z axes expressed in ego coords.
    r_ego_from_cam = np.array([
        [s, 0.0, c],
        [-c, 0.0, s],
        [0.0, -1.0, 0.0],
    ])
    ego_from_cam = SE3Pose(r_ego_from_cam, np.asarray(position, dtype=float))
    return ego_from_cam.inverse()


def camera_from_world(cam: CameraModel, traj: EgoTrajectory, t: Timestamp) -> SE3Pose:
    """World-to-camera transform with the ego at its pose for time t."""
    return cam.mount.compose(pose_at(traj, t).inverse())


def project(cam: CameraModel, point_cam: np.ndarray) -> tuple[float, float]:
    """Pinhole projection of a single camera-frame point to pixels.

    Raises NonPositiveDepth if the point is on or behind the camera plane.
    """
    x, y, z = np.asarray(point_cam, dtype=float).reshape(3)
    if z <= 0.0:
        raise NonPositiveDepth(f"depth {z} <= 0")
    return cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy


def project_points(cam: CameraModel, points_cam: np.ndarray) -> np.ndarray:
    """Vectorized pinhole projection of (N, 3) camera-frame points to (N, 2) pixels.

    Depths must already be strictly positive; callers filter on z first.
    """
    pts = np.asarray(points_cam, dtype=float).reshape(-1, 3)
    z = pts[:, 2]
    uv = np.empty((pts.shape[0], 2))
    uv[:, 0] = cam.fx * pts[:, 0] / z + cam.cx
    uv[:, 1] = cam.fy * pts[:, 1] / z + cam.cy
    return uv
