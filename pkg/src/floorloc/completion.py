"""Scene completion: decide when registration is ambiguous, find the
missing region at sensor height, plan a virtual camera trajectory that
gradually covers it, and invoke a pluggable completer to add 3D content.

The completer interface stands in for any generative completion stack;
shipped implementations are a no-op, a ground-truth oracle (with optional
depth noise), and a directory of precomputed per-view point sets.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import BoundaryNotVisible, CompletionFailed, NoMissingRegion
from .geometry import (
    CameraModel,
    Plane,
    PointCloud2,
    PointCloud3,
    Pose2,
    Pose3,
    se2_apply,
    se2_inverse,
    to_floor_frame,
    wrap_angle,
)
from .hull import concave_hull, sample_polyline
from .lidar import OccupancyGrid2
from .register import RegistrationResult


# ---------------------------------------------------------------------------
# completion decision


@dataclass(frozen=True)
class DecisionParams:
    theta_R: float = 20.0  # degrees
    theta_T: float = 0.3  # meters
    c: float = 20.0  # loss gap, in millimeters

    def __post_init__(self):
        if self.theta_R <= 0 or self.theta_T <= 0 or self.c <= 0:
            raise ValueError("decision parameters must be positive")


def should_complete(
    result: RegistrationResult,
    params: DecisionParams,
    loss_scale: float = 0.001,
) -> tuple[bool, dict]:
    """Multi-local-minima test: drop everything close to the best pose,
    and flag completion when the best survivor's loss is within ``c`` of
    the best. Losses are compared in units of ``loss_scale`` (default
    millimeters, so the default c=20 means a 2 cm Chamfer gap — about
    twice the scan noise sigma; nearer minima are indistinguishable).
    """
    best = result.best
    theta_r = np.radians(params.theta_R)
    survivors = []
    for cand in result.candidates:
        d_rot = abs(wrap_angle(cand.pose.theta - best.pose.theta))
        d_t = float(np.linalg.norm(cand.pose.t - best.pose.t))
        if not (d_rot < theta_r and d_t < params.theta_T):
            survivors.append(cand)
    diag = {"l1": best.loss / loss_scale, "l2": None, "gap": None, "survivors": len(survivors)}
    if not survivors:
        return False, diag
    second = min(survivors, key=lambda c: c.loss)
    diag["l2"] = second.loss / loss_scale
    diag["gap"] = diag["l2"] - diag["l1"]
    return bool(diag["gap"] < params.c), diag


# ---------------------------------------------------------------------------
# scene point sets


@dataclass(frozen=True)
class SceneSets:
    hits: PointCloud2
    downprojected: PointCloud2
    missing: PointCloud2
    boundary_point: np.ndarray
    frontiers: PointCloud2
    height: float

    def __post_init__(self):
        object.__setattr__(
            self, "boundary_point", np.asarray(self.boundary_point, dtype=np.float64).reshape(2)
        )


def cluster_points(points: np.ndarray, threshold: float = 0.15) -> np.ndarray:
    """Single-linkage Euclidean clustering: component labels of the graph
    connecting every pair of points closer than ``threshold``."""
    n = points.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    pairs = cKDTree(points).query_pairs(threshold, output_type="ndarray")
    adj = coo_matrix(
        (np.ones(pairs.shape[0]), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    )
    _, labels = connected_components(adj, directed=False)
    return labels


def _largest_cluster(points: np.ndarray, threshold: float) -> np.ndarray:
    labels = cluster_points(points, threshold)
    counts = np.bincount(labels)
    return points[labels == int(counts.argmax())]


def compute_scene_sets(
    cloud: PointCloud3,
    hits: PointCloud2,
    floor: Plane,
    rvc_height: float,
    *,
    vicinity: float = 0.15,
    frontier_len: float = 2.0,
    frontier_spacing: float = 0.1,
    cluster_threshold: float = 0.15,
    hull_subsample: float = 0.05,
) -> SceneSets:
    """Derive the point sets steering viewpoint planning: the sensor-height
    downprojection, its largest hit-free cluster (the missing region), the
    observed point nearest that region, and frontier samples walked along
    the concave hull into the hit-free direction."""
    if len(cloud) == 0:
        raise ValueError("cloud is empty")
    pts3 = to_floor_frame(cloud.points, floor) if floor is not None else cloud.points
    down = pts3[:, :2]

    if len(hits) == 0:
        missing_mask = np.ones(down.shape[0], dtype=bool)
    else:
        d, _ = cKDTree(hits.points).query(down)
        missing_mask = d > vicinity
    if not np.any(missing_mask):
        raise NoMissingRegion("every downprojected point has a nearby hit")
    missing = _largest_cluster(down[missing_mask], cluster_threshold)

    if len(hits) == 0:
        raise NoMissingRegion("no hit points to anchor the boundary")
    hit_cluster = _largest_cluster(hits.points, cluster_threshold)
    d_to_missing, _ = cKDTree(missing).query(hit_cluster)
    boundary = hit_cluster[int(d_to_missing.argmin())]

    # concave hull on a grid-thinned copy of the downprojection
    snapped = np.round(down / hull_subsample) * hull_subsample
    hull = concave_hull(np.unique(snapped, axis=0))
    frontiers = _walk_frontiers(
        hull, boundary, hits.points, vicinity, frontier_len, frontier_spacing
    )
    return SceneSets(
        hits=hits,
        downprojected=PointCloud2(down),
        missing=PointCloud2(missing),
        boundary_point=boundary,
        frontiers=PointCloud2(frontiers),
        height=rvc_height,
    )


def _walk_frontiers(hull, boundary, hit_pts, vicinity, frontier_len, spacing):
    """Sample the hull polyline from the vertex nearest the boundary point,
    walking in whichever direction is free of hit points."""
    samples = sample_polyline(hull, spacing, closed=True)
    n = samples.shape[0]
    start = int(np.linalg.norm(samples - boundary, axis=1).argmin())
    steps = max(1, int(round(frontier_len / spacing)))
    hit_tree = cKDTree(hit_pts) if hit_pts.shape[0] else None

    def direction_points(sign):
        idx = (start + sign * np.arange(1, steps + 1)) % n
        return samples[idx]

    def hit_free_score(pts):
        if hit_tree is None:
            return 1.0
        d, _ = hit_tree.query(pts)
        return float(np.mean(d > vicinity))

    fwd = direction_points(+1)
    bwd = direction_points(-1)
    return fwd if hit_free_score(fwd) >= hit_free_score(bwd) else bwd


# ---------------------------------------------------------------------------
# viewpoint planning


@dataclass(frozen=True)
class VirtualTrajectory:
    views: tuple[Pose3, ...]
    source_frame: int
    back_steps: int = 0
    rotations: int = 0


def _pitch(cam: Pose3) -> float:
    """Angle of the optical axis out of the horizontal plane, radians."""
    return float(np.arcsin(np.clip(-cam.optical_axis[2], -1.0, 1.0)))


def sees_point(
    cam: Pose3,
    point: np.ndarray,
    camera: CameraModel,
    occ: OccupancyGrid2 | None = None,
) -> bool:
    """FOV containment, range, and (optionally) line-of-sight in the
    sensor-height occupancy grid."""
    local = cam.rotation.T @ (np.asarray(point) - cam.t)
    z = local[2]
    if z <= 1e-9:
        return False
    dist = float(np.linalg.norm(local))
    if dist > camera.max_range:
        return False
    if abs(np.arctan2(local[0], z)) > camera.hfov / 2:
        return False
    if abs(np.arctan2(local[1], z)) > camera.vfov / 2:
        return False
    if occ is not None:
        return occ.line_of_sight(cam.t[:2], np.asarray(point)[:2])
    return True


def _count_visible(cam, frontiers3, camera, occ):
    return sum(1 for f in frontiers3 if sees_point(cam, f, camera, occ))


def plan_viewpoints(
    sets: SceneSets,
    video_cams: list[Pose3],
    camera: CameraModel,
    occ: OccupancyGrid2 | None = None,
    *,
    back_step: float = 0.2,
    rot_step: float = np.radians(10.0),
    max_rotation: float = np.radians(30.0),
    max_back_steps: int = 25,
) -> VirtualTrajectory:
    """Virtual camera trajectory: the least-pitch camera seeing the
    boundary point, backed up along its optical axis until half of the
    frontier points are visible, then yawed toward the rest in fixed
    steps up to the rotation cap."""
    bp3 = np.array([sets.boundary_point[0], sets.boundary_point[1], sets.height])
    seeing = [
        (i, cam) for i, cam in enumerate(video_cams) if sees_point(cam, bp3, camera, occ)
    ]
    if not seeing:
        raise BoundaryNotVisible("no video camera sees the boundary point")
    source_frame, cam = min(seeing, key=lambda ic: abs(_pitch(ic[1])))

    frontiers3 = [
        np.array([p[0], p[1], sets.height]) for p in sets.frontiers.points
    ]
    need_half = int(np.ceil(len(frontiers3) / 2.0)) if frontiers3 else 0

    views = [cam]
    back_steps = 0
    while (
        _count_visible(cam, frontiers3, camera, occ) < need_half
        and back_steps < max_back_steps
    ):
        cam = Pose3(cam.rotation, cam.t - back_step * cam.optical_axis)
        views.append(cam)
        back_steps += 1

    rotations = 0
    total_rot = 0.0
    while frontiers3 and total_rot + rot_step <= max_rotation + 1e-9:
        unseen = [f for f in frontiers3 if not sees_point(cam, f, camera, occ)]
        if not unseen:
            break
        sign = _rotation_sign(cam, unseen)
        rz = _rot_z(sign * rot_step)
        cam = Pose3(rz @ cam.rotation, cam.t)
        views.append(cam)
        rotations += 1
        total_rot += rot_step
    return VirtualTrajectory(tuple(views), source_frame, back_steps, rotations)


def _rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rotation_sign(cam: Pose3, unseen) -> float:
    axis = cam.optical_axis
    yaw = np.arctan2(axis[1], axis[0])
    offs = []
    for f in unseen:
        v = f - cam.t
        offs.append(wrap_angle(np.arctan2(v[1], v[0]) - yaw))
    mean = float(np.mean(offs)) if offs else 0.0
    return 1.0 if mean >= 0 else -1.0


# ---------------------------------------------------------------------------
# rendering


@dataclass(frozen=True)
class RenderedView:
    rgb: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) meters, 0 where empty
    mask: np.ndarray  # (H, W) bool, True where a point splatted

    @property
    def shape(self):
        return self.depth.shape


_PALETTE = np.array(
    [
        [0.6, 0.6, 0.6],
        [0.8, 0.3, 0.3],
        [0.3, 0.8, 0.3],
        [0.3, 0.3, 0.8],
        [0.8, 0.8, 0.3],
        [0.8, 0.3, 0.8],
        [0.3, 0.8, 0.8],
    ]
)


def _intrinsics(camera: CameraModel, width: int, height: int):
    fx = (width / 2.0) / np.tan(camera.hfov / 2.0)
    fy = (height / 2.0) / np.tan(camera.vfov / 2.0)
    return fx, fy, (width - 1) / 2.0, (height - 1) / 2.0


def render_partial_view(
    cloud: PointCloud3,
    view: Pose3,
    camera: CameraModel,
    width: int = 128,
    height: int = 96,
) -> RenderedView:
    """Z-buffered single-pixel point splatting into a pinhole view."""
    depth = np.zeros((height, width), dtype=np.float64)
    mask = np.zeros((height, width), dtype=bool)
    rgb = np.zeros((height, width, 3), dtype=np.float64)
    if len(cloud) == 0:
        return RenderedView(rgb, depth, mask)
    local = (cloud.points - view.t) @ view.rotation
    z = local[:, 2]
    keep = (z > 1e-6) & (z <= camera.max_range)
    local = local[keep]
    z = z[keep]
    fx, fy, cx, cy = _intrinsics(camera, width, height)
    u = np.round(fx * local[:, 0] / z + cx).astype(np.int64)
    v = np.round(fy * local[:, 1] / z + cy).astype(np.int64)
    inb = (u >= 0) & (u < width) & (v >= 0) & (v < height)
    u, v, z = u[inb], v[inb], z[inb]
    if cloud.colors is not None:
        col = cloud.colors[keep][inb]
    elif cloud.labels is not None:
        col = _PALETTE[cloud.labels[keep][inb] % len(_PALETTE)]
    else:
        col = np.full((z.shape[0], 3), 0.5)
    # nearest point wins each pixel
    order = np.lexsort((-z,))
    u, v, z, col = u[order], v[order], z[order], col[order]
    depth[v, u] = z
    mask[v, u] = True
    rgb[v, u] = col
    return RenderedView(rgb, depth, mask)


# ---------------------------------------------------------------------------
# completers


@dataclass(frozen=True)
class CompletionContext:
    view_index: int
    camera: CameraModel
    width: int
    height: int
    pixel_stride: int = 2


class Completer:
    """Adds 3D content for the unoccupied pixels of a rendered view.

    Implementations must only return points that project into previously
    unoccupied pixels; observed geometry is never rewritten.
    """

    def complete(self, view: Pose3, rendered: RenderedView, context: CompletionContext) -> PointCloud3:
        raise NotImplementedError


class NullCompleter(Completer):
    def complete(self, view, rendered, context):
        return PointCloud3()


class OracleCompleter(Completer):
    """Ray-casts the ground-truth scene through unoccupied pixels and
    returns true-surface points, optionally corrupted with depth noise to
    emulate an imperfect generative model.

    ``recon_to_scene`` is the ground-truth planar transform from the
    reconstruction's floor frame into the scene frame.
    """

    def __init__(
        self,
        scene,
        recon_to_scene: Pose2,
        depth_noise: float = 0.0,
        seed: int = 0,
    ):
        self.scene = scene
        self.gt = recon_to_scene
        self.gt_inv = se2_inverse(recon_to_scene)
        self.depth_noise = depth_noise
        self.seed = seed

    def complete(self, view, rendered, context):
        h, w = rendered.shape
        stride = context.pixel_stride
        vs, us = np.nonzero(~rendered.mask)
        pick = (vs % stride == 0) & (us % stride == 0)
        vs, us = vs[pick], us[pick]
        if vs.size == 0:
            return PointCloud3()
        fx, fy, cx, cy = _intrinsics(context.camera, w, h)
        dirs_cam = np.stack(
            [(us - cx) / fx, (vs - cy) / fy, np.ones_like(us, dtype=np.float64)], axis=1
        )
        dirs_recon = dirs_cam @ view.rotation.T
        # lift the planar ground-truth transform to 3D (z is shared)
        c, s = np.cos(self.gt.theta), np.sin(self.gt.theta)
        rz = np.array([[c, -s], [s, c]])
        dirs_scene = dirs_recon.copy()
        dirs_scene[:, :2] = dirs_recon[:, :2] @ rz.T
        origin_scene = np.array([*se2_apply(self.gt, view.t[:2]), view.t[2]])
        t, cls = self.scene.raycast(origin_scene, dirs_scene)
        ray_norm = np.linalg.norm(dirs_scene, axis=1)
        ok = np.isfinite(t) & (t * ray_norm <= context.camera.max_range)
        if not np.any(ok):
            return PointCloud3()
        t = t[ok]
        if self.depth_noise > 0:
            rng = np.random.default_rng(
                np.random.SeedSequence(self.seed, spawn_key=(context.view_index,))
            )
            t = np.maximum(t + rng.normal(0.0, self.depth_noise, size=t.shape), 1e-3)
        pts_scene = origin_scene + t[:, None] * dirs_scene[ok]
        pts_recon = pts_scene.copy()
        pts_recon[:, :2] = se2_apply(self.gt_inv, pts_scene[:, :2])
        return PointCloud3(pts_recon, labels=cls[ok])


class FileCompleter(Completer):
    """Reads precomputed per-view completions: ``<dir>/<view_index>.json``
    holding {"points": [[x,y,z],...], "labels": [...]} in the
    reconstruction frame. Missing files mean no content for that view."""

    def __init__(self, directory: str):
        self.directory = directory

    def complete(self, view, rendered, context):
        path = os.path.join(self.directory, f"{context.view_index}.json")
        if not os.path.exists(path):
            return PointCloud3()
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        pts = np.array(data.get("points", []), dtype=np.float64).reshape(-1, 3)
        labels = data.get("labels")
        labels = np.array(labels, dtype=np.int64) if labels else None
        return PointCloud3(pts, labels=labels)


def complete_scene(
    cloud: PointCloud3,
    trajectory: VirtualTrajectory,
    completer: Completer,
    camera: CameraModel,
    *,
    width: int = 128,
    height: int = 96,
    pixel_stride: int = 2,
) -> PointCloud3:
    """Auto-regressive completion: render the growing cloud at each view
    in order, ask the completer for content in unoccupied pixels, and
    merge. Original points are never modified."""
    if not trajectory.views:
        raise ValueError("trajectory is empty")
    current = cloud
    for i, view in enumerate(trajectory.views):
        rendered = render_partial_view(current, view, camera, width, height)
        ctx = CompletionContext(i, camera, width, height, pixel_stride)
        try:
            added = completer.complete(view, rendered, ctx)
        except Exception as exc:  # noqa: BLE001 - contract maps failures to view index
            raise CompletionFailed(i, exc) from exc
        if len(added) == 0:
            continue
        current = _merge(current, added)
    return current


def _merge(a: PointCloud3, b: PointCloud3) -> PointCloud3:
    pts = np.vstack([a.points, b.points])
    labels = None
    if a.labels is not None or b.labels is not None:
        la = a.labels if a.labels is not None else np.full(len(a), -1, dtype=np.int64)
        lb = b.labels if b.labels is not None else np.full(len(b), -1, dtype=np.int64)
        labels = np.concatenate([la, lb])
    colors = None
    if a.colors is not None or b.colors is not None:
        ca = a.colors if a.colors is not None else np.full((len(a), 3), 0.5)
        cb = b.colors if b.colors is not None else np.full((len(b), 3), 0.5)
        colors = np.vstack([ca, cb])
    return PointCloud3(pts, labels=labels, colors=colors)
