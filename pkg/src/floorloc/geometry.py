"""SE(2)/SE(3) pose algebra, point-cloud containers, floor-plane estimation
and camera downprojection to sensor height.

Cameras use the usual computer-vision frame: +z is the optical axis,
+x right, +y down.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientFloorPoints

TWO_PI = 2.0 * np.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    return float(-((np.pi - theta) % TWO_PI - np.pi))


@dataclass(frozen=True)
class Pose2:
    """Planar rigid transform: rotation by theta then translation by t."""

    theta: float
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(2))

    @staticmethod
    def identity() -> "Pose2":
        return Pose2(0.0, np.zeros(2))

    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.theta), np.sin(self.theta)
        m = np.array([[c, -s, self.t[0]], [s, c, self.t[1]], [0.0, 0.0, 1.0]])
        return m


@dataclass(frozen=True)
class Pose3:
    """Spatial rigid transform with a 3x3 rotation matrix and translation."""

    rotation: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(3))
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6) or np.linalg.det(r) < 0:
            raise ValueError("rotation must be orthonormal with determinant +1")

    @property
    def optical_axis(self) -> np.ndarray:
        return self.rotation[:, 2]


@dataclass(frozen=True)
class CameraModel:
    hfov: float
    vfov: float
    max_range: float

    def __post_init__(self):
        if not (0.0 < self.hfov < np.pi and 0.0 < self.vfov < np.pi):
            raise ValueError("fov must be in (0, pi)")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")


@dataclass(frozen=True)
class PointCloud2:
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(p)):
            raise ValueError("non-finite coordinates")
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class PointCloud3:
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    labels: np.ndarray | None = None
    colors: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValueError("non-finite coordinates")
        object.__setattr__(self, "points", p)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if lab.shape[0] != p.shape[0]:
                raise ValueError("labels length mismatch")
            object.__setattr__(self, "labels", lab)
        if self.colors is not None:
            col = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
            if col.shape[0] != p.shape[0]:
                raise ValueError("colors length mismatch")
            object.__setattr__(self, "colors", col)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class Plane:
    """Plane {x : normal . x + offset = 0} with unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-9:
            n = n / norm
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts).reshape(-1, 3) @ self.normal + self.offset


# ---------------------------------------------------------------------------
# SE(2) operations


def se2_apply(p: Pose2, q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    c, s = np.cos(p.theta), np.sin(p.theta)
    r = np.array([[c, -s], [s, c]])
    return q @ r.T + p.t


def se2_compose(a: Pose2, b: Pose2) -> Pose2:
    return Pose2(a.theta + b.theta, se2_apply(a, b.t))


def se2_inverse(p: Pose2) -> Pose2:
    c, s = np.cos(p.theta), np.sin(p.theta)
    r = np.array([[c, -s], [s, c]])
    return Pose2(-p.theta, -(r.T @ p.t))


def pose_error(pred: Pose2, gt: Pose2) -> tuple[float, float]:
    """(rotation error in degrees, translation error in meters)."""
    rel = se2_compose(se2_inverse(gt), pred)
    rot_err = abs(np.degrees(rel.theta))
    trans_err = float(np.linalg.norm(pred.t - gt.t))
    return rot_err, trans_err


# ---------------------------------------------------------------------------
# floor plane


def fit_floor_plane(
    cloud: PointCloud3,
    floor_class: int,
    *,
    inlier_threshold: float = 0.02,
    iterations: int = 500,
    seed: int = 0,
    min_points: int = 50,
) -> Plane:
    """RANSAC plane fit on floor-labeled points, refined by least squares
    on the inliers. The normal is oriented so that the majority of
    non-floor points fall on its positive side.
    """
    if cloud.labels is None:
        raise InsufficientFloorPoints("cloud has no labels")
    mask = cloud.labels == floor_class
    pts = cloud.points[mask]
    if pts.shape[0] < min_points:
        raise InsufficientFloorPoints(f"{pts.shape[0]} floor points < {min_points}")

    rng = np.random.default_rng(seed)
    best_inliers = None
    best_count = -1
    n = pts.shape[0]
    for _ in range(iterations):
        idx = rng.choice(n, size=3, replace=False)
        a, b, c = pts[idx]
        normal = np.cross(b - a, c - a)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal = normal / norm
        d = -normal @ a
        dist = np.abs(pts @ normal + d)
        inliers = dist < inlier_threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None or best_count < 3:
        raise InsufficientFloorPoints("RANSAC found no plane")

    inl = pts[best_inliers]
    centroid = inl.mean(axis=0)
    _, _, vt = np.linalg.svd(inl - centroid, full_matrices=False)
    normal = vt[2]
    offset = float(-normal @ centroid)

    non_floor = cloud.points[~mask]
    if non_floor.shape[0] > 0:
        side = non_floor @ normal + offset
        if np.count_nonzero(side > 0) < side.shape[0] / 2:
            normal, offset = -normal, -offset
    elif normal[2] < 0:
        normal, offset = -normal, -offset
    return Plane(normal, offset)


def floor_frame(floor: Plane) -> tuple[np.ndarray, np.ndarray]:
    """Rotation R and translation t mapping world points into the floor
    frame: x' = R x + t, with the plane at z' = 0 and z' along the normal.
    """
    n = floor.normal
    ref = np.array([1.0, 0.0, 0.0])
    if abs(n @ ref) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    e1 = ref - (ref @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    r = np.stack([e1, e2, n])
    p0 = -floor.offset * n
    return r, -(r @ p0)


def to_floor_frame(pts: np.ndarray, floor: Plane) -> np.ndarray:
    r, t = floor_frame(floor)
    return np.asarray(pts).reshape(-1, 3) @ r.T + t


def downproject_cameras(
    cams: list[Pose3],
    floor: Plane,
    rvc_height: float,
    *,
    degenerate_angle: float = np.radians(5.0),
) -> list[tuple[Pose2, bool]]:
    """Collapse camera poses to 2D poses in the floor frame, keeping only
    planar position and yaw (direction of the optical axis projected onto
    the floor). Cameras whose optical axis is within ``degenerate_angle``
    of the floor normal have undefined yaw and are flagged invalid.
    """
    r, t = floor_frame(floor)
    out = []
    for cam in cams:
        center = r @ cam.t + t
        axis = r @ cam.optical_axis
        planar = np.linalg.norm(axis[:2])
        valid = planar >= np.sin(degenerate_angle)
        yaw = float(np.arctan2(axis[1], axis[0])) if valid else 0.0
        out.append((Pose2(yaw, center[:2]), valid))
    return out
