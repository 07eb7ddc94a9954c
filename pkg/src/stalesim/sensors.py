"""Time-accurate sensor simulation: spinning lidar, rolling-shutter camera, buffered radar.

Timing model:

    The lidar spins at 10 Hz.  A sweep starting at ``t0`` samples azimuth
    column k (of N) at the end of that column's dwell, t0 + 0.1*(k+1)/N, and
    the beam reaches the configured sweep-end azimuth exactly at t0 + 0.1.
    The sweep timestamp is the latest point timestamp ("end" of sweep).

    The camera is phase-locked to the beam: it starts scanning its first row
    when the beam sweeps past the camera's facing azimuth, which puts the
    trigger time strictly inside the preceding 100 ms (``camera_trigger_time``).
    Row r of an image is sampled at capture_time + r * row_time.

    Radars free-run at their own periods with phase offsets and are not
    phase-locked to anything; consumers read a trailing one-second buffer.

All simulation here is deterministic: lidar and camera need no randomness,
and radar draws from an explicitly passed generator.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBuffer
from .geometry import CameraModel, EgoTrajectory, Timestamp, pose_at, rot_z
from .scene import Scene, box_corners, object_state_at

SWEEP_PERIOD = 0.1       # 10 Hz lidar rotation and camera frame rate
RADAR_BUFFER_WINDOW = 1.0

_TWO_PI = 2.0 * math.pi
_HIT_EPS = 1e-9


def camera_trigger_time(t_sweep_end: Timestamp, theta_lidar: float, theta_camera: float) -> Timestamp:
    """Phase-locked camera capture time for a sweep ending at ``t_sweep_end``.

    The azimuth gap from the camera facing direction back to the sweep end,
    normalized into (0, 2*pi], maps linearly onto the 100 ms rotation period:
    the camera fired that fraction of a period before the sweep ended.
    """
    delta = (theta_lidar - theta_camera) % _TWO_PI
    if delta == 0.0:
        delta = _TWO_PI
    return t_sweep_end - SWEEP_PERIOD * delta / _TWO_PI


@dataclass(frozen=True)
class LidarConfig:
    n_columns: int = 1800
    n_rows: int = 32
    elevation_min: float = math.radians(-17.0)
    elevation_max: float = math.radians(5.0)
    max_range: float = 120.0
    mount_position: tuple[float, float, float] = (0.0, 0.0, 2.0)
    sweep_end_azimuth: float = 0.0   # ego-frame beam azimuth when a sweep completes
    include_ground: bool = True
    ground_intensity: float = 0.1

    def elevations(self) -> np.ndarray:
        return np.linspace(self.elevation_min, self.elevation_max, self.n_rows)


@dataclass(frozen=True)
class LidarSweep:
    """One sweep as parallel arrays in emission order (by column, then row).

    Positions are ego-frame at each point's own capture instant.  Per-point
    times are stored as float32 offsets from ``sweep_start``; ``end_time`` is
    the latest point timestamp, or sweep_start + 0.1 for an empty sweep.
    """

    positions: np.ndarray     # (n, 3) float32
    intensity: np.ndarray     # (n,) float32, [0, 1]
    time_offsets: np.ndarray  # (n,) float32, seconds since sweep_start
    azimuth: np.ndarray       # (n,) float32, [0, 2*pi)
    sweep_start: Timestamp
    end_time: Timestamp

    def __post_init__(self):
        n = self.positions.shape[0]
        if self.intensity.shape != (n,) or self.time_offsets.shape != (n,) or self.azimuth.shape != (n,):
            raise ValueError("sweep arrays must have matching lengths")
        if n:
            expected_end = self.sweep_start + float(self.time_offsets.max())
        else:
            expected_end = self.sweep_start + SWEEP_PERIOD
        if abs(self.end_time - expected_end) > 1e-9:
            raise ValueError("end_time must equal the latest point timestamp")

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def timestamps(self) -> np.ndarray:
        """Absolute per-point times, float64."""
        return self.sweep_start + self.time_offsets.astype(np.float64)


def beam_azimuth_at(config: LidarConfig, sweep_start: Timestamp, t: Timestamp) -> float:
    """Ego-frame beam azimuth at time ``t`` for the sweep starting at ``sweep_start``."""
    return (config.sweep_end_azimuth + _TWO_PI * (t - sweep_start) / SWEEP_PERIOD) % _TWO_PI


def simulate_lidar_sweep(
    scene: Scene,
    ego: EgoTrajectory,
    sweep_start: Timestamp,
    config: LidarConfig,
) -> LidarSweep:
    """Raycast one full sweep against all object boxes and the ground plane.

    Each azimuth column is cast from the ego pose and object states at the
    column's own beam time, so a moving platform shears the sweep exactly as
    a real spinning unit would.  Nearest hit wins; intensity is the object's
    reflectivity (ground: configured constant).
    """
    n_cols, n_rows = config.n_columns, config.n_rows
    k = np.arange(n_cols)
    t_cols = sweep_start + SWEEP_PERIOD * (k + 1) / n_cols
    az_cols = (config.sweep_end_azimuth + _TWO_PI * (k + 1) / n_cols) % _TWO_PI

    elev = config.elevations()
    cos_e, sin_e = np.cos(elev), np.sin(elev)
    cos_a, sin_a = np.cos(az_cols), np.sin(az_cols)
    # Ego-frame ray directions, (cols, rows, 3).
    dirs_e = np.empty((n_cols, n_rows, 3))
    dirs_e[:, :, 0] = cos_a[:, None] * cos_e[None, :]
    dirs_e[:, :, 1] = sin_a[:, None] * cos_e[None, :]
    dirs_e[:, :, 2] = sin_e[None, :]

    # Ego poses per column (planar: yaw + translation).
    dt = t_cols - ego.reference_time
    yaw0 = math.atan2(ego.reference_pose.rotation[1, 0], ego.reference_pose.rotation[0, 0])
    yaws = yaw0 + ego.yaw_rate * dt
    cos_y, sin_y = np.cos(yaws), np.sin(yaws)
    ego_pos = ego.reference_pose.translation[None, :] + ego.velocity[None, :] * dt[:, None]

    mount = np.asarray(config.mount_position)
    origin_w = np.empty((n_cols, 3))
    origin_w[:, 0] = ego_pos[:, 0] + cos_y * mount[0] - sin_y * mount[1]
    origin_w[:, 1] = ego_pos[:, 1] + sin_y * mount[0] + cos_y * mount[1]
    origin_w[:, 2] = ego_pos[:, 2] + mount[2]

    dirs_w = np.empty_like(dirs_e)
    dirs_w[:, :, 0] = cos_y[:, None] * dirs_e[:, :, 0] - sin_y[:, None] * dirs_e[:, :, 1]
    dirs_w[:, :, 1] = sin_y[:, None] * dirs_e[:, :, 0] + cos_y[:, None] * dirs_e[:, :, 1]
    dirs_w[:, :, 2] = dirs_e[:, :, 2]

    best_t = np.full((n_cols, n_rows), np.inf)
    best_intensity = np.zeros((n_cols, n_rows))

    if config.include_ground:
        with np.errstate(divide="ignore", invalid="ignore"):
            t_ground = -origin_w[:, 2:3] / dirs_w[:, :, 2]
        hit = np.isfinite(t_ground) & (t_ground > _HIT_EPS) & (t_ground <= config.max_range)
        best_t = np.where(hit, t_ground, best_t)
        best_intensity = np.where(hit, config.ground_intensity, best_intensity)

    for obj in scene.objects:
        centers = obj.center[None, :] + obj.velocity[None, :] * (t_cols - obj.reference_time)[:, None]
        r_box = rot_z(obj.yaw)
        # Express rays in the box frame: b = R^T w  ==  w @ R.
        o_b = np.einsum("kj,ji->ki", origin_w - centers, r_box)
        d_b = np.einsum("krj,ji->kri", dirs_w, r_box)
        half = obj.extents / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half[None, None, :] - o_b[:, None, :]) / d_b
            t2 = (half[None, None, :] - o_b[:, None, :]) / d_b
        t_near = np.minimum(t1, t2).max(axis=2)
        t_far = np.maximum(t1, t2).min(axis=2)
        hit = (t_far >= t_near) & (t_near > _HIT_EPS) & (t_near <= config.max_range)
        closer = hit & (t_near < best_t)
        best_t = np.where(closer, t_near, best_t)
        best_intensity = np.where(closer, obj.reflectivity, best_intensity)

    hit_mask = np.isfinite(best_t)
    cols_idx, rows_idx = np.nonzero(hit_mask)
    dist = best_t[cols_idx, rows_idx]
    positions = mount[None, :] + dist[:, None] * dirs_e[cols_idx, rows_idx]
    offsets = SWEEP_PERIOD * (cols_idx + 1) / n_cols

    positions32 = positions.astype(np.float32)
    intensity32 = best_intensity[cols_idx, rows_idx].astype(np.float32)
    offsets32 = offsets.astype(np.float32)
    azimuth32 = az_cols[cols_idx].astype(np.float32)
    if len(offsets32):
        end_time = sweep_start + float(offsets32.max())
    else:
        end_time = sweep_start + SWEEP_PERIOD
    return LidarSweep(
        positions=positions32,
        intensity=intensity32,
        time_offsets=offsets32,
        azimuth=azimuth32,
        sweep_start=float(sweep_start),
        end_time=end_time,
    )


@dataclass(frozen=True)
class CameraImage:
    """Grayscale rolling-shutter frame; ``capture_time`` is the first-row exposure end."""

    pixels: np.ndarray  # (height, width) float32 in [0, 1]
    capture_time: Timestamp
    row_time: float
    exposure: float
    camera_id: int = 0

    def __post_init__(self):
        if self.pixels.ndim != 2:
            raise ValueError("pixels must be a 2-D grid")
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("pixels must be finite")

    def row_capture_time(self, row: int) -> Timestamp:
        return self.capture_time + row * self.row_time


_PAIR_I, _PAIR_J = np.triu_indices(8, k=1)  # the 28 corner pairs of a box


def simulate_camera_image(
    scene: Scene,
    ego: EgoTrajectory,
    cam: CameraModel,
    t_capture: Timestamp,
) -> CameraImage:
    """Render a rolling-shutter intensity image.

    Row r sees the world (ego pose and object states) at
    t_capture + r * row_time.  Objects are filled convex hulls of their
    projected corners at that row's scanline, shaded by reflectivity with
    nearest-object-wins; the background is 0.  Scanlines sample pixel
    centers (row r is the line v = r + 0.5).
    """
    h, w = cam.height, cam.width
    img = np.zeros((h, w))
    depth = np.full((h, w), np.inf)

    rows = np.arange(h)
    t_rows = t_capture + rows * cam.row_time
    dt = t_rows - ego.reference_time
    yaw0 = math.atan2(ego.reference_pose.rotation[1, 0], ego.reference_pose.rotation[0, 0])
    yaws = yaw0 + ego.yaw_rate * dt
    cos_y, sin_y = np.cos(yaws), np.sin(yaws)
    ego_pos = ego.reference_pose.translation[None, :] + ego.velocity[None, :] * dt[:, None]

    # Camera-from-world per row: R_cw = R_mount @ R_ego^T, t_cw = R_mount @ (-R_ego^T p) + t_mount.
    r_mount, t_mount = cam.mount.rotation, cam.mount.translation
    r_ego = np.zeros((h, 3, 3))
    r_ego[:, 0, 0] = cos_y
    r_ego[:, 0, 1] = -sin_y
    r_ego[:, 1, 0] = sin_y
    r_ego[:, 1, 1] = cos_y
    r_ego[:, 2, 2] = 1.0
    r_cw = np.einsum("ij,hkj->hik", r_mount, r_ego)
    t_cw = -np.einsum("hij,hj->hi", r_cw, ego_pos) + t_mount[None, :]

    scan_v = rows + 0.5
    cols = np.arange(w)

    for obj in scene.objects:
        corners_ref = box_corners(
            obj.center - obj.velocity * obj.reference_time, obj.extents, obj.yaw
        )
        # Corner world positions per row (constant yaw: corners translate rigidly).
        corners_w = corners_ref[None, :, :] + (obj.velocity[None, :] * t_rows[:, None])[:, None, :]
        corners_c = np.einsum("hij,hkj->hki", r_cw, corners_w) + t_cw[:, None, :]
        z = corners_c[:, :, 2]
        valid = z > _HIT_EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            u = cam.fx * corners_c[:, :, 0] / z + cam.cx
            v = cam.fy * corners_c[:, :, 1] / z + cam.cy

        # Convex-hull scanline interval via all pairwise corner segments: the
        # extremes over segment crossings equal the hull crossings.
        vi, vj = v[:, _PAIR_I], v[:, _PAIR_J]
        ui, uj = u[:, _PAIR_I], u[:, _PAIR_J]
        seg_ok = valid[:, _PAIR_I] & valid[:, _PAIR_J]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (scan_v[:, None] - vi) / (vj - vi)
        cross = seg_ok & np.isfinite(s) & (s >= 0.0) & (s <= 1.0)
        u_star = ui + s * (uj - ui)
        u_lo = np.where(cross, u_star, np.inf).min(axis=1)
        u_hi = np.where(cross, u_star, -np.inf).max(axis=1)

        c_lo = np.ceil(u_lo - 0.5).astype(int)
        c_hi = np.floor(u_hi - 0.5).astype(int)
        row_has = (u_hi >= u_lo) & (c_hi >= 0) & (c_lo <= w - 1)
        c_lo = np.clip(c_lo, 0, w - 1)
        c_hi = np.clip(c_hi, 0, w - 1)

        centers_w = (obj.center - obj.velocity * obj.reference_time)[None, :] + obj.velocity[None, :] * t_rows[:, None]
        obj_depth = np.einsum("hij,hj->hi", r_cw, centers_w)[:, 2] + t_cw[:, 2]

        mask = row_has[:, None] & (cols[None, :] >= c_lo[:, None]) & (cols[None, :] <= c_hi[:, None])
        closer = mask & (obj_depth[:, None] < depth)
        img = np.where(closer, obj.reflectivity, img)
        depth = np.where(closer, obj_depth[:, None], depth)

    return CameraImage(
        pixels=img.astype(np.float32),
        capture_time=float(t_capture),
        row_time=cam.row_time,
        exposure=cam.exposure,
    )


@dataclass(frozen=True)
class RadarConfig:
    radar_id: int = 0
    period: float = 0.055
    phase: float = 0.0
    mount_position: tuple[float, float, float] = (0.5, 0.8, 0.6)
    mount_azimuth: float = math.pi / 2.0
    fov_half: float = math.radians(74.0)
    range_min: float = 1.0
    range_max: float = 90.0
    sigma_range: float = 0.15
    doppler_half_interval: float = 16.0
    snr_ref: float = 40.0   # SNR at 1 m; falls off as 20*log10(range)


@dataclass(frozen=True)
class RadarPoint:
    position: np.ndarray  # ego frame at capture, float64
    rcs: float            # dBsm
    snr: float            # dB, > 0
    doppler: float        # folded radial velocity, positive toward the sensor
    timestamp: Timestamp
    radar_id: int

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))


def fold_doppler(radial_velocity: float, half_interval: float) -> float:
    """Fold a radial velocity into [-half_interval, +half_interval)."""
    width = 2.0 * half_interval
    return (radial_velocity + half_interval) % width - half_interval


def simulate_radar(
    scene: Scene,
    ego: EgoTrajectory,
    t_fire: Timestamp,
    config: RadarConfig,
    rng: np.random.Generator,
) -> list[RadarPoint]:
    """One radar firing: a return per object inside the field of view and range.

    Each return sits at the object's nearest surface point with Gaussian
    range noise along the ray; Doppler is the true radial closing speed
    (positive toward the sensor) folded into the unambiguous interval.
    """
    pose = pose_at(ego, t_fire)
    sensor_w = pose.apply(np.asarray(config.mount_position, dtype=float))
    r_sensor = pose.rotation @ rot_z(config.mount_azimuth)
    # Sensor-point velocity includes the lever arm from the yaw rate.
    arm = sensor_w - pose.translation
    v_sensor = ego.velocity + ego.yaw_rate * np.array([-arm[1], arm[0], 0.0])

    points = []
    for obj in scene.objects:
        center, yaw, velocity = object_state_at(obj, t_fire)
        r_box = rot_z(yaw)
        local = r_box.T @ (sensor_w - center)
        half = obj.extents / 2.0
        nearest_local = np.clip(local, -half, half)
        nearest_w = r_box @ nearest_local + center
        offs = nearest_w - sensor_w
        rng_true = float(np.linalg.norm(offs))
        if rng_true <= _HIT_EPS or not config.range_min <= rng_true <= config.range_max:
            continue
        u = offs / rng_true
        u_s = r_sensor.T @ u
        if abs(math.atan2(u_s[1], u_s[0])) > config.fov_half:
            continue
        snr = config.snr_ref - 20.0 * math.log10(rng_true)
        if snr <= 0.0:
            continue
        doppler = fold_doppler(-float(np.dot(velocity - v_sensor, u)), config.doppler_half_interval)
        noisy_range = rng_true + rng.normal(0.0, config.sigma_range)
        position_w = sensor_w + noisy_range * u
        points.append(
            RadarPoint(
                position=pose.inverse().apply(position_w),
                rcs=obj.rcs,
                snr=snr,
                doppler=doppler,
                timestamp=float(t_fire),
                radar_id=config.radar_id,
            )
        )
    return points


@dataclass(frozen=True)
class RadarBuffer:
    """Trailing window of returns, at most one second deep; ``latest_time`` is the newest timestamp."""

    points: tuple[RadarPoint, ...]
    latest_time: Timestamp

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise ValueError("radar buffer cannot be empty")
        times = [p.timestamp for p in self.points]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("buffer points must be time-ordered")
        if times[-1] - times[0] > RADAR_BUFFER_WINDOW + 1e-12:
            raise ValueError("buffer spans more than the one-second window")
        if self.latest_time != times[-1]:
            raise ValueError("latest_time must equal the newest point timestamp")

    def __len__(self) -> int:
        return len(self.points)

    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.points]).reshape(-1, 3)

    def timestamps(self) -> np.ndarray:
        return np.array([p.timestamp for p in self.points])


def radar_buffer_at(points: list[RadarPoint], t_query: Timestamp) -> RadarBuffer:
    """All returns with timestamp in (t_query - 1 s, t_query]; raises EmptyBuffer on outage.

    ``points`` must already be time-sorted (merged across radars).
    """
    times = [p.timestamp for p in points]
    lo = bisect.bisect_right(times, t_query - RADAR_BUFFER_WINDOW)
    hi = bisect.bisect_right(times, t_query)
    window = points[lo:hi]
    if not window:
        raise EmptyBuffer(f"no radar returns in ({t_query - RADAR_BUFFER_WINDOW}, {t_query}]")
    return RadarBuffer(points=tuple(window), latest_time=window[-1].timestamp)
