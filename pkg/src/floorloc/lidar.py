"""2D LiDAR simulation from ground-truth scenes and emulated hit points
obtained by ray casting into a reconstructed cloud at sensor height."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import EmptySlab, SensorOutsideScene
from .geometry import Plane, PointCloud2, PointCloud3, Pose2, se2_apply
from .scene import Scene, slice_scene


@dataclass(frozen=True)
class NoiseModel:
    sigma: float = 0.01
    drop_prob: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ValueError("drop_prob must be in [0, 1)")

    @staticmethod
    def none() -> "NoiseModel":
        return NoiseModel(sigma=0.0, drop_prob=0.0, seed=0)


@dataclass(frozen=True)
class VirtualSensor:
    pose: Pose2
    hfov: float = 2.0 * np.pi
    num_rays: int = 720
    max_range: float = 30.0

    def __post_init__(self):
        if self.num_rays < 1:
            raise ValueError("num_rays must be >= 1")

    def ray_angles(self) -> np.ndarray:
        """Ray headings, evenly spaced across hfov centered on the pose
        heading. A full-circle sensor spaces rays without duplicating the
        wrap-around endpoint."""
        if self.hfov >= 2.0 * np.pi - 1e-9:
            offs = np.linspace(0.0, 2.0 * np.pi, self.num_rays, endpoint=False)
        elif self.num_rays == 1:
            offs = np.zeros(1)
        else:
            offs = np.linspace(-self.hfov / 2.0, self.hfov / 2.0, self.num_rays)
        return self.pose.theta + offs


@dataclass(frozen=True)
class OccupancyGrid2:
    resolution: float
    origin: np.ndarray  # world xy of cell (row=0, col=0) lower-left corner
    cells: np.ndarray  # bool (rows, cols)

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(2))
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=bool))

    @staticmethod
    def from_points(points: np.ndarray, resolution: float, pad_cells: int = 2) -> "OccupancyGrid2":
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if pts.shape[0] == 0:
            raise ValueError("no points")
        origin = pts.min(axis=0) - pad_cells * resolution
        idx = np.floor((pts - origin) / resolution).astype(np.int64)
        shape = (int(idx[:, 1].max()) + 1 + pad_cells, int(idx[:, 0].max()) + 1 + pad_cells)
        cells = np.zeros(shape, dtype=bool)
        cells[idx[:, 1], idx[:, 0]] = True
        return OccupancyGrid2(resolution, origin, cells)

    def to_cell(self, xy) -> np.ndarray:
        """Fractional (col, row) grid coordinates of a world point."""
        return (np.asarray(xy, dtype=np.float64) - self.origin) / self.resolution

    def cell_centers(self, rows_cols: np.ndarray) -> np.ndarray:
        rc = np.asarray(rows_cols).reshape(-1, 2)
        return self.origin + (rc[:, ::-1] + 0.5) * self.resolution

    def line_of_sight(self, a, b, clearance_cells: float = 1.5) -> bool:
        """True when the straight segment a->b crosses no occupied cell
        (ignoring hits within ``clearance_cells`` of either endpoint)."""
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        dist = np.linalg.norm(b - a)
        if dist < 1e-12:
            return True
        d = (b - a) / dist
        hits = kernels.grid_first_hits(
            self.cells, self.to_cell(a), d.reshape(1, 2), dist / self.resolution
        )
        if hits[0, 0] < 0:
            return True
        center = self.cell_centers(hits[:1])[0]
        margin = clearance_cells * self.resolution
        return (
            np.linalg.norm(center - a) <= margin or np.linalg.norm(center - b) <= margin
        )


def apply_noise(points: np.ndarray, noise: NoiseModel, stream_key: int = 0) -> np.ndarray:
    """Gaussian jitter then independent dropout, deterministic per
    (seed, stream_key) so per-sensor streams are parallelism-invariant."""
    rng = np.random.default_rng(np.random.SeedSequence(noise.seed, spawn_key=(stream_key,)))
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if noise.sigma > 0 and pts.shape[0] > 0:
        pts = pts + rng.normal(0.0, noise.sigma, size=pts.shape)
    if noise.drop_prob > 0 and pts.shape[0] > 0:
        keep = rng.random(pts.shape[0]) >= noise.drop_prob
        pts = pts[keep]
    return pts


def simulate_lidar(
    scene: Scene,
    sensors: list[VirtualSensor],
    height: float,
    noise: NoiseModel | None = None,
) -> PointCloud2:
    """Union of noisy range measurements from all virtual sensors against
    the scene sliced at the given height."""
    noise = noise or NoiseModel.none()
    centers = np.array([s.pose.t for s in sensors]).reshape(-1, 2)
    inside = kernels.points_in_polygon(centers, scene.floor_polygon)
    if not np.all(inside):
        raise SensorOutsideScene(f"{int((~inside).sum())} sensor(s) outside the floor polygon")
    segs = slice_scene(scene, height)
    chunks = []
    for i, sensor in enumerate(sensors):
        angles = sensor.ray_angles()
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        dist = kernels.ray_segment_distances(sensor.pose.t, dirs, segs, sensor.max_range)
        hit = np.isfinite(dist)
        pts = sensor.pose.t + dist[hit, None] * dirs[hit]
        chunks.append(apply_noise(pts, noise, stream_key=i))
    pts = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, 2))
    return PointCloud2(pts)


def raycast_hits(
    cloud: PointCloud3,
    floor: Plane,
    rvc_height: float,
    cams: list[Pose2],
    *,
    hfov: float,
    num_rays: int,
    max_range: float,
    slab: float = 0.10,
    resolution: float = 0.025,
) -> PointCloud2:
    """Emulate RVC LiDAR hit points: keep the cloud slab around the sensor
    height, rasterize it to an occupancy grid, and march rays from each
    downprojected camera. Hits are first-occupied-cell centers, deduplicated.

    The cloud must already be expressed in the floor frame (floor z = 0);
    ``floor`` is accepted for callers that still hold world-frame clouds.
    """
    pts = cloud.points
    if floor is not None:
        from .geometry import to_floor_frame

        pts = to_floor_frame(pts, floor)
    in_slab = np.abs(pts[:, 2] - rvc_height) <= slab / 2.0
    if not np.any(in_slab):
        raise EmptySlab("no points within the sensor-height slab")
    grid = OccupancyGrid2.from_points(pts[in_slab, :2], resolution)
    max_cells = max_range / resolution
    hit_cells = []
    for cam in cams:
        sensor = VirtualSensor(cam, hfov=hfov, num_rays=num_rays, max_range=max_range)
        angles = sensor.ray_angles()
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        rc = kernels.grid_first_hits(grid.cells, grid.to_cell(cam.t), dirs, max_cells)
        hit_cells.append(rc[rc[:, 0] >= 0])
    if hit_cells:
        rc = np.unique(np.concatenate(hit_cells, axis=0), axis=0)
    else:
        rc = np.zeros((0, 2), dtype=np.int64)
    return PointCloud2(grid.cell_centers(rc))


def save_scan(pc: PointCloud2, path) -> None:
    import json

    with open(path, "w", encoding="utf-8") as f:
        json.dump({"points": pc.points.tolist()}, f)


def load_scan(path) -> PointCloud2:
    import json

    with open(path, encoding="utf-8") as f:
        return PointCloud2(np.array(json.load(f)["points"], dtype=np.float64).reshape(-1, 2))


def coverage_metric(H: PointCloud2, P: PointCloud2, gt: Pose2, radius: float = 0.1) -> float:
    """Fraction of LiDAR-map points with a ground-truth-aligned hit point
    within ``radius``. Predicts how much of the map the scan explains."""
    if len(P) == 0:
        return 0.0
    if len(H) == 0:
        return 0.0
    aligned = se2_apply(gt, H.points)
    d, _ = cKDTree(aligned).query(P.points)
    return float(np.count_nonzero(d <= radius) / len(P))
