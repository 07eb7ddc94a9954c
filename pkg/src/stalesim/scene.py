"""Synthetic worlds: ego trajectory plus constant-velocity box objects, and labels.

Objects are upright 3D boxes on the ground plane (z = 0) moving with constant
world-frame velocity and fixed yaw.  Scenes are immutable after generation and
all queries are pure functions, so they are safe to share across workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig
from .geometry import (
    CameraModel,
    EgoTrajectory,
    SE3Pose,
    Timestamp,
    camera_from_world,
    project_points,
    rot_z,
)

_BEHIND_EPS = 1e-9


class ObjectClass(enum.Enum):
    CAR = "Car"
    PED = "Ped"
    CYC = "Cyc"


# Typical metric extents (length, width, height) used at generation time.
CLASS_EXTENTS = {
    ObjectClass.CAR: (4.5, 2.0, 1.6),
    ObjectClass.PED: (0.6, 0.6, 1.7),
    ObjectClass.CYC: (1.8, 0.6, 1.6),
}

# Hard per-class speed caps (m/s) enforced on generation configs.
CLASS_SPEED_CAP = {
    ObjectClass.CAR: 15.0,
    ObjectClass.PED: 2.0,
    ObjectClass.CYC: 8.0,
}


@dataclass(frozen=True)
class BoxObject:
    """One dynamic box: pose/velocity at a reference time plus sensor-relevant surface properties."""

    object_id: int
    object_class: ObjectClass
    center: np.ndarray        # world frame, at reference_time
    extents: np.ndarray       # (length, width, height), > 0 componentwise
    yaw: float
    velocity: np.ndarray      # world frame, m/s
    reflectivity: float       # [0, 1], drives lidar intensity and image brightness
    rcs: float                # dBsm
    reference_time: Timestamp = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "extents", np.asarray(self.extents, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))
        if not np.all(self.extents > 0):
            raise ValueError("extents must be positive componentwise")


@dataclass(frozen=True)
class Scene:
    ego: EgoTrajectory
    objects: tuple[BoxObject, ...]
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.duration <= 0:
            raise ValueError("scene duration must be positive")
        ids = [obj.object_id for obj in self.objects]
        if len(ids) != len(set(ids)):
            raise ValueError("object ids must be unique")


@dataclass(frozen=True)
class Label:
    """Ground truth for one object at the bundle target time, in the camera frame."""

    object_id: int
    object_class: ObjectClass
    center_cam: np.ndarray
    extents: np.ndarray
    yaw_cam: float
    velocity_cam: np.ndarray
    box2d: tuple[float, float, float, float]  # (u_min, v_min, u_max, v_max), clipped

    def box_center(self) -> tuple[float, float]:
        u0, v0, u1, v1 = self.box2d
        return 0.5 * (u0 + u1), 0.5 * (v0 + v1)


def object_state_at(obj: BoxObject, t: Timestamp):
    """(center, yaw, velocity) of the box at time t under constant velocity."""
    center = obj.center + obj.velocity * (t - obj.reference_time)
    return center, obj.yaw, obj.velocity


def box_corners(center: np.ndarray, extents: np.ndarray, yaw: float) -> np.ndarray:
    """(8, 3) world-frame corner positions of an upright box."""
    half = np.asarray(extents, dtype=float) / 2.0
    signs = np.array(
        [
            [sx, sy, sz]
            for sx in (-1.0, 1.0)
            for sy in (-1.0, 1.0)
            for sz in (-1.0, 1.0)
        ]
    )
    return signs * half @ rot_z(yaw).T + np.asarray(center, dtype=float)


def labels_at(
    scene: Scene,
    cam: CameraModel,
    ego: EgoTrajectory,
    t: Timestamp,
) -> list[Label]:
    """Labels for every object visible at time t, expressed in the camera frame.

    Objects entirely behind the camera plane are excluded; partially-behind
    objects keep the hull of their in-front corners.  2D boxes are the
    axis-aligned hull of the projected corners, clipped to the image; objects
    whose clipped hull has zero area are dropped.  Occlusion is ignored.
    """
    cam_from_world = camera_from_world(cam, ego, t)
    labels = []
    for obj in scene.objects:
        center, yaw, velocity = object_state_at(obj, t)
        corners_cam = cam_from_world.apply(box_corners(center, obj.extents, yaw))
        in_front = corners_cam[:, 2] > _BEHIND_EPS
        if not in_front.any():
            continue
        uv = project_points(cam, corners_cam[in_front])
        u_min = max(float(uv[:, 0].min()), 0.0)
        u_max = min(float(uv[:, 0].max()), float(cam.width))
        v_min = max(float(uv[:, 1].min()), 0.0)
        v_max = min(float(uv[:, 1].max()), float(cam.height))
        if u_max - u_min <= 0.0 or v_max - v_min <= 0.0:
            continue
        heading = np.array([math.cos(yaw), math.sin(yaw), 0.0])
        h_cam = cam_from_world.rotation @ heading
        labels.append(
            Label(
                object_id=obj.object_id,
                object_class=obj.object_class,
                center_cam=cam_from_world.apply(center),
                extents=obj.extents.copy(),
                yaw_cam=math.atan2(h_cam[0], h_cam[2]),
                velocity_cam=cam_from_world.rotation @ velocity,
                box2d=(u_min, v_min, u_max, v_max),
            )
        )
    return labels


@dataclass(frozen=True)
class SceneGenConfig:
    """Placement and kinematics ranges for random scene generation.

    Objects are spawned inside ``x_range`` x ``y_range`` on the ground; the
    ego starts at the origin heading +x.  Per-class speed ranges are capped at
    the class limits (Car 15, Cyc 8, Ped 2 m/s).
    """

    n_objects: int = 12
    duration: float = 2.4
    x_range: tuple[float, float] = (-15.0, 45.0)
    y_range: tuple[float, float] = (6.0, 42.0)
    class_probs: tuple[float, float, float] = (0.45, 0.30, 0.25)  # Car, Ped, Cyc
    speed_ranges: dict = field(
        default_factory=lambda: {
            ObjectClass.CAR: (0.0, 13.0),
            ObjectClass.PED: (0.0, 1.8),
            ObjectClass.CYC: (0.0, 7.0),
        }
    )
    reflectivity_ranges: dict = field(
        default_factory=lambda: {
            ObjectClass.CAR: (0.55, 0.90),
            ObjectClass.PED: (0.15, 0.35),
            ObjectClass.CYC: (0.35, 0.55),
        }
    )
    rcs_ranges: dict = field(
        default_factory=lambda: {
            ObjectClass.CAR: (10.0, 25.0),
            ObjectClass.PED: (-8.0, 0.0),
            ObjectClass.CYC: (0.0, 8.0),
        }
    )
    extent_jitter: float = 0.1
    ego_speed_range: tuple[float, float] = (8.0, 14.0)
    ego_yaw_rate_range: tuple[float, float] = (0.0, 0.0)
    min_ego_clearance: float = 3.0

    def validate(self):
        if self.n_objects < 0:
            raise InvalidConfig("n_objects must be >= 0")
        if self.duration <= 0:
            raise InvalidConfig("duration must be positive")
        for name, (lo, hi) in (("x_range", self.x_range), ("y_range", self.y_range)):
            if hi <= lo:
                raise InvalidConfig(f"{name} must be a nonempty interval")
        if any(p < 0 for p in self.class_probs) or sum(self.class_probs) <= 0:
            raise InvalidConfig("class_probs must be nonnegative and sum > 0")
        for cls, (lo, hi) in self.speed_ranges.items():
            if lo < 0 or hi < lo:
                raise InvalidConfig(f"bad speed range for {cls}")
            if hi > CLASS_SPEED_CAP[cls]:
                raise InvalidConfig(f"speed range for {cls} exceeds cap {CLASS_SPEED_CAP[cls]}")
        if not 0.0 <= self.extent_jitter < 1.0:
            raise InvalidConfig("extent_jitter must lie in [0, 1)")
        if self.ego_speed_range[1] < self.ego_speed_range[0] or self.ego_speed_range[0] < 0:
            raise InvalidConfig("bad ego_speed_range")
        if self.min_ego_clearance < 0:
            raise InvalidConfig("min_ego_clearance must be >= 0")


_CLASS_ORDER = (ObjectClass.CAR, ObjectClass.PED, ObjectClass.CYC)


def generate_scene(config: SceneGenConfig, seed: int) -> Scene:
    """Deterministically generate a scene from (config, seed).

    The same (config, seed) pair always produces bit-identical scenes; nearby
    seeds produce different object placements.
    """
    config.validate()
    rng = np.random.default_rng(seed)

    ego_speed = rng.uniform(*config.ego_speed_range)
    ego_yaw_rate = rng.uniform(*config.ego_yaw_rate_range) if config.ego_yaw_rate_range[1] > config.ego_yaw_rate_range[0] else config.ego_yaw_rate_range[0]
    ego = EgoTrajectory(
        reference_pose=SE3Pose.identity(),
        reference_time=0.0,
        velocity=np.array([ego_speed, 0.0, 0.0]),
        yaw_rate=ego_yaw_rate,
    )

    probs = np.asarray(config.class_probs, dtype=float)
    probs = probs / probs.sum()
    objects = []
    for i in range(config.n_objects):
        cls = _CLASS_ORDER[rng.choice(3, p=probs)]
        scale = rng.uniform(1.0 - config.extent_jitter, 1.0 + config.extent_jitter)
        extents = np.asarray(CLASS_EXTENTS[cls]) * scale
        # Rejection-sample a position clear of the ego start; bounded retries
        # keep generation total even for tight configs.
        for _ in range(100):
            x = rng.uniform(*config.x_range)
            y = rng.uniform(*config.y_range)
            if math.hypot(x, y) >= config.min_ego_clearance:
                break
        else:
            raise InvalidConfig("cannot place object clear of ego; widen ranges")
        yaw = rng.uniform(0.0, 2.0 * math.pi)
        speed = rng.uniform(*config.speed_ranges[cls])
        objects.append(
            BoxObject(
                object_id=i,
                object_class=cls,
                center=np.array([x, y, extents[2] / 2.0]),
                extents=extents,
                yaw=yaw,
                velocity=speed * np.array([math.cos(yaw), math.sin(yaw), 0.0]),
                reflectivity=rng.uniform(*config.reflectivity_ranges[cls]),
                rcs=rng.uniform(*config.rcs_ranges[cls]),
            )
        )
    return Scene(ego=ego, objects=tuple(objects), duration=config.duration)
