"""Procedural floor-plan scenes and synthetic trial bundles: a scene, its
simulated LiDAR map, a partial labeled reconstruction sampled along a
camera trajectory, and the ground-truth planar transform between them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DatasetConfig, LidarConfig, SensorConfig
from .errors import InvalidSpec
from .geometry import CameraModel, PointCloud2, PointCloud3, Pose2, Pose3, se2_apply, se2_inverse
from .lidar import NoiseModel, VirtualSensor, simulate_lidar
from .scene import Obstacle, Scene

CLASS_TABLE = {0: "floor", 1: "wall", 2: "table", 3: "chair", 4: "sofa", 5: "cabinet"}

# z extents per furniture class; tables float above the sensor height
_FURNITURE = {
    2: (0.55, 0.75),
    3: (0.0, 0.45),
    4: (0.0, 0.42),
    5: (0.0, 1.9),
}


def camera_model(sensor: SensorConfig) -> CameraModel:
    return CameraModel(
        hfov=np.radians(sensor.camera_hfov_deg),
        vfov=np.radians(sensor.camera_vfov_deg),
        max_range=sensor.camera_max_range,
    )


@dataclass(frozen=True)
class TrialBundle:
    scene_id: int
    trial_seed: int
    scene: Scene
    lidar_map: PointCloud2
    cloud: PointCloud3  # reconstruction frame, labeled
    cams: tuple[Pose3, ...]  # reconstruction frame
    gt: Pose2  # reconstruction frame -> scene frame


def random_rectilinear_polygon(rng: np.random.Generator, min_extent: float, max_extent: float) -> np.ndarray:
    """Rectangle with 1-3 corner notches cut out: simple, rectilinear and
    (almost surely) rotationally asymmetric."""
    w = rng.uniform(min_extent, max_extent)
    h = rng.uniform(min_extent, max_extent * 0.85)
    n_notches = int(rng.integers(1, 4))
    corners = rng.permutation(4)[:n_notches]
    verts: list[tuple[float, float]] = []

    def notch_size():
        return (
            rng.uniform(0.8, min(3.0, w / 2 - 0.5)),
            rng.uniform(0.8, min(3.0, h / 2 - 0.5)),
        )

    for corner, base in enumerate([(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]):
        if corner in corners:
            nx, ny = notch_size()
            if corner == 0:
                verts += [(0.0, ny), (nx, ny), (nx, 0.0)]
            elif corner == 1:
                verts += [(w - nx, 0.0), (w - nx, ny), (w, ny)]
            elif corner == 2:
                verts += [(w, h - ny), (w - nx, h - ny), (w - nx, h)]
            else:
                verts += [(nx, h), (nx, h - ny), (0.0, h - ny)]
        else:
            verts.append(base)
    return np.array(verts, dtype=np.float64)


def square_scene(size: float = 5.0) -> Scene:
    """Perfectly 4-fold-symmetric empty room, for ambiguity tests."""
    half = size / 2.0
    poly = np.array([[-half, -half], [half, -half], [half, half], [-half, half]])
    return Scene(poly, class_table=CLASS_TABLE)


def generate_scene(rng: np.random.Generator, spec: DatasetConfig) -> Scene:
    poly = random_rectilinear_polygon(rng, spec.min_extent, spec.max_extent)
    from . import kernels

    obstacles = []
    n_furniture = int(rng.integers(spec.furniture_min, spec.furniture_max + 1))
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    tries = 0
    while len(obstacles) < n_furniture and tries < 200:
        tries += 1
        cls = int(rng.choice(list(_FURNITURE)))
        sx = rng.uniform(0.4, 1.4)
        sy = rng.uniform(0.4, 1.4)
        cx = rng.uniform(lo[0] + 1.0, hi[0] - 1.0)
        cy = rng.uniform(lo[1] + 1.0, hi[1] - 1.0)
        box = np.array(
            [
                [cx - sx / 2, cy - sy / 2],
                [cx + sx / 2, cy - sy / 2],
                [cx + sx / 2, cy + sy / 2],
                [cx - sx / 2, cy + sy / 2],
            ]
        )
        if not np.all(kernels.points_in_polygon(box, poly)):
            continue
        if any(np.linalg.norm(box.mean(axis=0) - ob.footprint.mean(axis=0)) < 1.2 for ob in obstacles):
            continue
        z0, z1 = _FURNITURE[cls]
        obstacles.append(Obstacle(box, z0, z1, cls))
    return Scene(poly, tuple(obstacles), CLASS_TABLE)


def lidar_sensor_poses(scene: Scene, spacing: float) -> list[Pose2]:
    """Interior grid sample of the floor polygon, emulating a robot that
    mapped the whole floor."""
    from . import kernels

    lo = scene.floor_polygon.min(axis=0) + spacing / 2
    hi = scene.floor_polygon.max(axis=0)
    xs = np.arange(lo[0], hi[0], spacing)
    ys = np.arange(lo[1], hi[1], spacing)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = kernels.points_in_polygon(pts, scene.floor_polygon)
    # keep clear of obstacle interiors
    keep = inside.copy()
    for ob in scene.obstacles:
        keep &= ~kernels.points_in_polygon(pts, ob.footprint)
    return [Pose2(0.0, p) for p in pts[keep]]


def simulate_map(scene: Scene, sensor: SensorConfig, lidar: LidarConfig, noisy: bool) -> PointCloud2:
    poses = lidar_sensor_poses(scene, lidar.sensor_grid)
    sensors = [
        VirtualSensor(p, hfov=2 * np.pi, num_rays=lidar.num_rays, max_range=lidar.max_range)
        for p in poses
    ]
    noise = (
        NoiseModel(lidar.noise_sigma, lidar.drop_prob, lidar.noise_seed)
        if noisy
        else NoiseModel.none()
    )
    pc = simulate_lidar(scene, sensors, sensor.rvc_height, noise)
    # thin duplicate returns from overlapping sensors onto a fine grid
    snapped = np.round(pc.points / 0.02).astype(np.int64)
    _, idx = np.unique(snapped, axis=0, return_index=True)
    return PointCloud2(pc.points[np.sort(idx)])


def _camera_pose(position: np.ndarray, yaw: float, pitch_down: float) -> Pose3:
    cb, sb = np.cos(pitch_down), np.sin(pitch_down)
    cy, sy = np.cos(yaw), np.sin(yaw)
    z_axis = np.array([cb * cy, cb * sy, -sb])
    x_axis = np.array([sy, -cy, 0.0])
    y_axis = np.cross(z_axis, x_axis)
    r = np.stack([x_axis, y_axis, z_axis], axis=1)
    return Pose3(r, position)


def camera_trajectory(
    scene: Scene,
    rng: np.random.Generator,
    *,
    spacing: float = 1.8,
    yaw_count: int = 8,
    height: float = 1.4,
    pitch_down_deg: float = 18.0,
) -> list[Pose3]:
    from . import kernels

    lo = scene.floor_polygon.min(axis=0) + 0.7
    hi = scene.floor_polygon.max(axis=0) - 0.7
    xs = np.arange(lo[0], hi[0] + 1e-9, spacing)
    ys = np.arange(lo[1], hi[1] + 1e-9, spacing)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = kernels.points_in_polygon(pts, scene.floor_polygon)
    for ob in scene.obstacles:
        inside &= ~kernels.points_in_polygon(pts, ob.footprint)
    pts = pts[inside]
    if pts.shape[0] == 0:
        pts = scene.floor_polygon.mean(axis=0, keepdims=True)
    cams = []
    yaw0 = rng.uniform(0.0, 2 * np.pi)
    pitch = np.radians(pitch_down_deg)
    for p in pts:
        for j in range(yaw_count):
            yaw = yaw0 + 2 * np.pi * j / yaw_count
            cams.append(_camera_pose(np.array([p[0], p[1], height]), yaw, pitch))
    return cams


def sample_reconstruction(
    scene: Scene,
    cams: list[Pose3],
    camera: CameraModel,
    rng: np.random.Generator,
    *,
    rays_u: int = 36,
    rays_v: int = 27,
    max_points: int = 20000,
) -> PointCloud3:
    """Visible-surface sampling: a ray grid over each camera's FOV cast
    into the ground-truth scene."""
    tan_h = np.tan(camera.hfov / 2.0)
    tan_v = np.tan(camera.vfov / 2.0)
    us = np.linspace(-tan_h, tan_h, rays_u)
    vs = np.linspace(-tan_v, tan_v, rays_v)
    gu, gv = np.meshgrid(us, vs)
    dirs_cam = np.stack([gu.ravel(), gv.ravel(), np.ones(gu.size)], axis=1)
    pts_all, labs_all = [], []
    for cam in cams:
        dirs = dirs_cam @ cam.rotation.T
        t, cls = scene.raycast(cam.t, dirs)
        norm = np.linalg.norm(dirs, axis=1)
        ok = np.isfinite(t) & (t * norm <= camera.max_range)
        if not np.any(ok):
            continue
        pts_all.append(cam.t + t[ok, None] * dirs[ok])
        labs_all.append(cls[ok])
    if not pts_all:
        raise InvalidSpec("camera trajectory saw nothing")
    pts = np.vstack(pts_all)
    labs = np.concatenate(labs_all)
    if pts.shape[0] > max_points:
        pick = rng.choice(pts.shape[0], size=max_points, replace=False)
        pick.sort()
        pts, labs = pts[pick], labs[pick]
    return PointCloud3(pts, labels=labs)


def _remove_low_sector(
    cloud: PointCloud3, scene: Scene, fraction: float, rng: np.random.Generator, z_cut: float = 0.3
) -> PointCloud3:
    """Delete low-height content in an angular sector around the scene
    centroid, emulating a video that missed the lower part of the scene.
    The floor surface itself survives (it stays visible in any video), so
    floor-plane fitting keeps working at extreme fractions."""
    if fraction <= 0:
        return cloud
    center = scene.floor_polygon.mean(axis=0)
    phi = rng.uniform(-np.pi, np.pi)
    bearing = np.arctan2(cloud.points[:, 1] - center[1], cloud.points[:, 0] - center[0])
    delta = np.abs((bearing - phi + np.pi) % (2 * np.pi) - np.pi)
    drop = (
        (cloud.points[:, 2] > 0.02)
        & (cloud.points[:, 2] < z_cut)
        & (delta < np.pi * fraction)
    )
    keep = ~drop
    return PointCloud3(
        cloud.points[keep],
        labels=None if cloud.labels is None else cloud.labels[keep],
    )


def _to_recon_frame(cloud: PointCloud3, cams: list[Pose3], gt: Pose2):
    gt_inv = se2_inverse(gt)
    pts = cloud.points.copy()
    pts[:, :2] = se2_apply(gt_inv, pts[:, :2])
    c, s = np.cos(gt_inv.theta), np.sin(gt_inv.theta)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    new_cams = []
    for cam in cams:
        t = np.array([*se2_apply(gt_inv, cam.t[:2]), cam.t[2]])
        new_cams.append(Pose3(rz @ cam.rotation, t))
    return PointCloud3(pts, labels=cloud.labels), new_cams


def generate_trial(
    index: int,
    spec: DatasetConfig,
    sensor: SensorConfig,
    lidar: LidarConfig,
    *,
    low_coverage_fraction: float | None = None,
) -> TrialBundle:
    seq = np.random.SeedSequence(spec.seed, spawn_key=(index,))
    rng = np.random.default_rng(seq)
    trial_seed = int(seq.generate_state(1)[0])
    scene = generate_scene(rng, spec)
    lidar_cfg = lidar
    if spec.lidar_noise:
        lidar_cfg = LidarConfig(
            sensor_grid=lidar.sensor_grid,
            num_rays=lidar.num_rays,
            max_range=lidar.max_range,
            noise_sigma=lidar.noise_sigma,
            drop_prob=lidar.drop_prob,
            noise_seed=trial_seed % (2**31),
        )
    lidar_map = simulate_map(scene, sensor, lidar_cfg, noisy=spec.lidar_noise)
    cam_model = camera_model(sensor)
    cams_scene = camera_trajectory(scene, rng)
    cloud_scene = sample_reconstruction(scene, cams_scene, cam_model, rng)
    frac = spec.low_coverage_fraction if low_coverage_fraction is None else low_coverage_fraction
    cloud_scene = _remove_low_sector(cloud_scene, scene, frac, rng)
    gt = Pose2(rng.uniform(-np.pi, np.pi), rng.uniform(-3.0, 3.0, size=2))
    cloud, cams = _to_recon_frame(cloud_scene, cams_scene, gt)
    return TrialBundle(
        scene_id=index,
        trial_seed=trial_seed,
        scene=scene,
        lidar_map=lidar_map,
        cloud=cloud,
        cams=tuple(cams),
        gt=gt,
    )


def trial_fractions(spec: DatasetConfig) -> list[float]:
    """Per-trial low-coverage fractions. A negative configured fraction
    spreads trials evenly over [0, |fraction|] to span coverage levels."""
    n = spec.num_trials
    f = spec.low_coverage_fraction
    if f >= 0:
        return [f] * n
    top = abs(f)
    if n == 1:
        return [top]
    return [top * i / (n - 1) for i in range(n)]


def generate_dataset(spec: DatasetConfig, sensor: SensorConfig, lidar: LidarConfig):
    """Yield trial bundles; deterministic in the dataset seed."""
    if spec.num_trials < 1:
        raise InvalidSpec("num_trials must be >= 1")
    if not -1.0 < spec.low_coverage_fraction < 1.0:
        raise InvalidSpec("low_coverage_fraction must be in (-1, 1)")
    fracs = trial_fractions(spec)
    for i in range(spec.num_trials):
        yield generate_trial(i, spec, sensor, lidar, low_coverage_fraction=fracs[i])
