"""2D-2D registration of emulated hit points to the LiDAR map.

Pipeline: rasterize both clouds, template-match over a rotation sweep to
get top-k initial poses by normalized cross-correlation, then refine each
candidate with gradient descent on the one-directional Chamfer distance.
A trimmed point-to-point ICP is provided as a baseline under the same
result contract.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal
from scipy.spatial import cKDTree

from .errors import EmptyCloud
from .geometry import PointCloud2, Pose2, se2_apply, wrap_angle


@dataclass(frozen=True)
class Raster:
    image: np.ndarray
    origin: np.ndarray
    resolution: float

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(2))


@dataclass(frozen=True)
class PoseCandidate:
    pose: Pose2
    loss: float
    ncc_score: float = 0.0


@dataclass(frozen=True)
class RegistrationResult:
    best: PoseCandidate
    candidates: tuple[PoseCandidate, ...]
    iterations: int
    wall_time: float


@dataclass(frozen=True)
class OptimizerSettings:
    max_iters: int = 200
    tol: float = 1e-6
    initial_step: float = 0.1
    shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 30
    nn_resolution: float = 0.01
    workers: int = 1


@dataclass(frozen=True)
class IcpSettings:
    max_iters: int = 100
    tol: float = 1e-9
    trim_fraction: float = 0.0
    workers: int = 1


def rasterize(pc: PointCloud2, resolution: float, blur_sigma: float = 0.0) -> Raster:
    """Binary splat of the points, optionally Gaussian-blurred, with the
    maximum normalized to 1. Padding leaves room for the blur tails."""
    if len(pc) == 0:
        raise EmptyCloud("cannot rasterize an empty cloud")
    pad = int(np.ceil(3.0 * blur_sigma)) + 1
    origin = pc.points.min(axis=0) - pad * resolution
    idx = np.floor((pc.points - origin) / resolution).astype(np.int64)
    shape = (int(idx[:, 1].max()) + 1 + pad, int(idx[:, 0].max()) + 1 + pad)
    img = np.zeros(shape, dtype=np.float64)
    img[idx[:, 1], idx[:, 0]] = 1.0
    if blur_sigma > 0:
        img = ndimage.gaussian_filter(img, blur_sigma)
        img /= img.max()
    return Raster(img, origin, resolution)


def chamfer_1d(X: PointCloud2, Y: PointCloud2) -> float:
    """One-directional Chamfer distance: mean distance from each point of
    X to its nearest neighbor in Y."""
    if len(X) == 0 or len(Y) == 0:
        raise EmptyCloud("chamfer_1d needs non-empty clouds")
    d, _ = cKDTree(Y.points).query(X.points)
    return float(d.mean())


def _rotate(points: np.ndarray, theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return points @ np.array([[c, -s], [s, c]]).T


def _box_sum_full(csum, th: int, tw: int) -> np.ndarray:
    """Sliding box sums of a (th, tw) window over the image underlying the
    padded integral image ``csum``, on the full-correlation output grid."""
    hp, wp = csum.shape[0] - 1, csum.shape[1] - 1
    i = np.arange(hp + th - 1)
    j = np.arange(wp + tw - 1)
    lo_r = np.clip(i - th + 1, 0, hp)
    hi_r = np.clip(i + 1, 0, hp)
    lo_c = np.clip(j - tw + 1, 0, wp)
    hi_c = np.clip(j + 1, 0, wp)
    return (
        csum[np.ix_(hi_r, hi_c)]
        - csum[np.ix_(hi_r, lo_c)]
        - csum[np.ix_(lo_r, hi_c)]
        + csum[np.ix_(lo_r, lo_c)]
    )


def ncc_init(
    H: PointCloud2,
    P: PointCloud2,
    k: int = 100,
    angle_step: float = 3.0,
    resolution: float = 0.05,
    *,
    blur_sigma: float = 1.5,
    nms_rot: float = 10.0,
    nms_trans: float = 0.15,
    peaks_per_rotation: int = 50,
) -> list[PoseCandidate]:
    """Top-k initial poses by normalized cross-correlation of the rotated
    hit-point raster against the map raster, with non-maximum suppression
    so the survivors are diverse. Each candidate carries its Chamfer loss.
    """
    if len(H) == 0 or len(P) == 0:
        raise EmptyCloud("ncc_init needs non-empty clouds")
    if k < 1:
        raise ValueError("k must be >= 1")
    p_ras = rasterize(P, resolution, blur_sigma)
    p_img = p_ras.image
    p_sq = p_img * p_img
    tree = cKDTree(P.points)

    thetas = np.radians(np.arange(0.0, 360.0, angle_step))
    rasters = [
        rasterize(PointCloud2(_rotate(H.points, th)), resolution, blur_sigma)
        for th in thetas
    ]
    # pad every rotated raster onto a shared canvas so a single batched FFT
    # correlates all rotations at once; zero padding at high indices leaves
    # each rotation's correlation values in the trailing sub-block
    big_h = max(r.image.shape[0] for r in rasters)
    big_w = max(r.image.shape[1] for r in rasters)
    # single-precision batch: correlation only ranks initializations, and
    # float32 FFTs run several times faster than float64
    stack = np.zeros((len(rasters), big_h, big_w), dtype=np.float32)
    for i, ras in enumerate(rasters):
        h, w = ras.image.shape
        stack[i, :h, :w] = ras.image
    num_all = signal.fftconvolve(
        p_img.astype(np.float32)[None], stack[:, ::-1, ::-1], mode="full", axes=(1, 2)
    )
    # integral image of the map energy: box sums of any window size in O(1)
    csum = np.zeros((p_img.shape[0] + 1, p_img.shape[1] + 1))
    csum[1:, 1:] = p_sq.cumsum(axis=0).cumsum(axis=1)
    local_cache: dict[tuple[int, int], np.ndarray] = {}

    raw: list[tuple[float, float, np.ndarray]] = []  # (score, theta, t)
    for i, (theta, t_ras) in enumerate(zip(thetas, rasters)):
        t_img = t_ras.image
        t_energy = float((t_img * t_img).sum())
        if t_energy <= 0:
            continue
        th, tw = t_img.shape
        num = num_all[i, big_h - th:, big_w - tw:]
        if (th, tw) not in local_cache:
            local_cache[th, tw] = _box_sum_full(csum, th, tw)
        local = local_cache[th, tw]
        # floor the local energy at 1% of the template energy: offsets with
        # negligible overlap cannot be genuine matches, and the floor keeps
        # single-precision FFT noise from spiking the normalized score there
        score = num / np.sqrt(np.maximum(local, 0.01 * t_energy) * t_energy)
        # local maxima only, best few per rotation
        peaks = (score == ndimage.maximum_filter(score, size=3)) & (score > 0.05)
        rows, cols = np.nonzero(peaks)
        if rows.size == 0:
            continue
        vals = score[rows, cols]
        order = np.argsort(-vals, kind="stable")[:peaks_per_rotation]
        for o in order:
            dy = int(rows[o]) - (th - 1)
            dx = int(cols[o]) - (tw - 1)
            t = p_ras.origin - t_ras.origin + np.array([dx, dy]) * resolution
            raw.append((float(vals[o]), float(theta), t))

    raw.sort(key=lambda r: -r[0])
    nms_rot_rad = np.radians(nms_rot)
    accepted: list[tuple[float, float, np.ndarray]] = []
    for score, theta, t in raw:
        close = False
        for _, th2, t2 in accepted:
            if (
                abs(wrap_angle(theta - th2)) < nms_rot_rad
                and np.linalg.norm(t - t2) < nms_trans
            ):
                close = True
                break
        if not close:
            accepted.append((score, theta, t))
            if len(accepted) >= k:
                break

    out = []
    for score, theta, t in accepted:
        pose = Pose2(theta, t)
        d, _ = tree.query(se2_apply(pose, H.points))
        out.append(PoseCandidate(pose, float(d.mean()), score))
    return out


# ---------------------------------------------------------------------------
# Chamfer gradient descent, batched across candidates


class _TreeNN:
    """Exact nearest-neighbor correspondences via a KD-tree."""

    def __init__(self, pts: np.ndarray):
        self.points = np.asarray(pts, dtype=np.float64)
        self.tree = cKDTree(self.points)

    def targets(self, flat: np.ndarray) -> np.ndarray:
        _, idx = self.tree.query(flat)
        return self.points[idx]


class _GridNN:
    """Precomputed nearest-neighbor field over the target cloud.

    A feature transform on a fine raster maps any query cell to the cloud
    point occupying the nearest occupied cell, so each correspondence
    query is an O(1) array lookup instead of a tree search. Returned
    targets are real cloud points; distances against them upper-bound the
    true nearest-neighbor distance, tight up to the raster step."""

    def __init__(self, pts: np.ndarray, resolution: float = 0.01, pad: float = 1.0):
        self.points = np.asarray(pts, dtype=np.float64)
        self.resolution = resolution
        self.origin = self.points.min(axis=0) - pad
        extent = self.points.max(axis=0) + pad - self.origin
        rows = int(np.ceil(extent[1] / resolution)) + 1
        cols = int(np.ceil(extent[0] / resolution)) + 1
        idx = np.floor((self.points - self.origin) / resolution).astype(np.int64)
        owner = np.full((rows, cols), -1, dtype=np.int64)
        owner[idx[:, 1], idx[:, 0]] = np.arange(self.points.shape[0])
        nr, nc = ndimage.distance_transform_edt(
            owner < 0, return_distances=False, return_indices=True
        )
        self.nearest = owner[nr, nc]

    def targets(self, flat: np.ndarray) -> np.ndarray:
        ij = np.floor((flat - self.origin) / self.resolution).astype(np.int64)
        c = np.clip(ij[:, 0], 0, self.nearest.shape[1] - 1)
        r = np.clip(ij[:, 1], 0, self.nearest.shape[0] - 1)
        return self.points[self.nearest[r, c]]


def _batch_loss(x, points, nn):
    """Chamfer loss per candidate: x is (m,3) rows of (theta, tx, ty)."""
    c = np.cos(x[:, 0])[:, None]
    s = np.sin(x[:, 0])[:, None]
    px, py = points[:, 0], points[:, 1]
    mx = c * px - s * py + x[:, 1:2]
    my = s * px + c * py + x[:, 2:3]
    flat = np.column_stack([mx.ravel(), my.ravel()])
    diff = flat - nn.targets(flat)
    return np.hypot(diff[:, 0], diff[:, 1]).reshape(x.shape[0], -1).mean(axis=1)


def _batch_loss_grad(x, points, nn):
    """Loss, analytic gradient with correspondences held fixed, and the
    correspondence targets themselves (m, n, 2)."""
    m, n = x.shape[0], points.shape[0]
    c = np.cos(x[:, 0])[:, None]
    s = np.sin(x[:, 0])[:, None]
    px, py = points[:, 0], points[:, 1]
    mx = c * px - s * py + x[:, 1:2]
    my = s * px + c * py + x[:, 2:3]
    targets = nn.targets(np.column_stack([mx.ravel(), my.ravel()])).reshape(m, n, 2)
    f, grad = _surrogate_loss_grad(x, points, targets)
    return f, grad, targets


def _surrogate_loss(x, points, targets):
    """Mean distance to *fixed* correspondents. Upper-bounds the true
    Chamfer loss (which re-minimizes over correspondents) and touches it
    at the pose where the correspondences were queried."""
    c = np.cos(x[:, 0])[:, None]
    s = np.sin(x[:, 0])[:, None]
    px, py = points[:, 0], points[:, 1]
    mx = c * px - s * py + x[:, 1:2]
    my = s * px + c * py + x[:, 2:3]
    return np.sqrt((mx - targets[:, :, 0]) ** 2 + (my - targets[:, :, 1]) ** 2).mean(axis=1)


def _surrogate_loss_grad(x, points, targets):
    """Fixed-correspondence loss and its analytic gradient per row of x."""
    c = np.cos(x[:, 0])[:, None]
    s = np.sin(x[:, 0])[:, None]
    px, py = points[:, 0], points[:, 1]
    mx = c * px - s * py + x[:, 1:2]
    my = s * px + c * py + x[:, 2:3]
    dx = mx - targets[:, :, 0]
    dy = my - targets[:, :, 1]
    d = np.sqrt(dx * dx + dy * dy)
    dd = np.where(d <= 1e-12, 1.0, d)  # zero-distance points: zero gradient
    ux = np.where(d <= 1e-12, 0.0, dx / dd)
    uy = np.where(d <= 1e-12, 0.0, dy / dd)
    drx = -s * px - c * py
    dry = c * px - s * py
    g_theta = (ux * drx + uy * dry).mean(axis=1)
    grad = np.column_stack([g_theta, ux.mean(axis=1), uy.mean(axis=1)])
    return d.mean(axis=1), grad


def chamfer_loss_gradient(pose: Pose2, H: PointCloud2, P: PointCloud2):
    """Loss and analytic gradient (d/dtheta, d/dtx, d/dty) of
    chamfer_1d(pose . H, P) with correspondences held fixed."""
    x = np.array([[pose.theta, pose.t[0], pose.t[1]]])
    f, g, _ = _batch_loss_grad(x, H.points, _TreeNN(P.points))
    return float(f[0]), g[0]


def _descend_batch(x0: np.ndarray, points, nn, opts: OptimizerSettings):
    """Backtracking gradient descent run simultaneously on all candidate
    rows; each row's trajectory is independent of the others.

    Correspondences are re-queried once per iteration; the line search
    evaluates the fixed-correspondence surrogate, which upper-bounds the
    loss and matches it at the query pose, so a surrogate decrease
    guarantees a loss decrease while backtracking itself runs query-free.
    """
    x = x0.copy()
    k = x.shape[0]
    f, g, targets = _batch_loss_grad(x, points, nn)
    active = np.ones(k, dtype=bool)
    iters = np.zeros(k, dtype=np.int64)
    for _ in range(opts.max_iters):
        idxs = np.flatnonzero(active)
        if idxs.size == 0:
            break
        iters[idxs] += 1
        xa, fa, ga, ta = x[idxs], f[idxs], g[idxs], targets[idxs]
        gnorm2 = (ga * ga).sum(axis=1)
        stalled = gnorm2 < 1e-24
        step = np.full(idxs.size, opts.initial_step)
        accepted = stalled.copy()  # stalled rows take no step
        x_new = xa.copy()
        for _ in range(opts.max_backtracks):
            rem = ~accepted
            if not rem.any():
                break
            x_try = xa[rem] - step[rem, None] * ga[rem]
            f_try = _surrogate_loss(x_try, points, ta[rem])
            ok = f_try <= fa[rem] - opts.armijo * step[rem] * gnorm2[rem]
            rem_idx = np.flatnonzero(rem)
            good = rem_idx[ok]
            x_new[good] = x_try[ok]
            accepted[good] = True
            step[rem_idx[~ok]] *= opts.shrink
        x[idxs] = x_new
        moved = accepted & ~stalled
        # one re-query serves both the convergence test and the next
        # iteration's gradient and correspondences
        f_new, g_new, t_new = _batch_loss_grad(x[idxs], points, nn)
        improved = fa - f_new
        f[idxs] = f_new
        g[idxs] = g_new
        targets[idxs] = t_new
        done = stalled | ~moved | (improved < opts.tol)
        active[idxs[done]] = False
    return x, f, iters


def optimize_poses(
    H: PointCloud2,
    P: PointCloud2,
    inits: list[PoseCandidate],
    opts: OptimizerSettings | None = None,
) -> RegistrationResult:
    """Refine every candidate independently by backtracking gradient
    descent on the one-directional Chamfer distance; correspondences are
    re-queried each iteration. Candidates are returned sorted by loss.

    Refinement is data-parallel across candidates (rows of one batch);
    splitting the batch across worker threads cannot change any result.
    """
    if not inits:
        raise ValueError("inits must be non-empty")
    if len(H) == 0 or len(P) == 0:
        raise EmptyCloud("optimize_poses needs non-empty clouds")
    opts = opts or OptimizerSettings()
    nn = _GridNN(P.points, resolution=opts.nn_resolution)
    x0 = np.array([[c.pose.theta, c.pose.t[0], c.pose.t[1]] for c in inits])
    t0 = time.perf_counter()
    if opts.workers > 1:
        chunks = np.array_split(np.arange(len(inits)), opts.workers)
        chunks = [ch for ch in chunks if ch.size]
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            parts = list(
                pool.map(lambda ch: _descend_batch(x0[ch], H.points, nn, opts), chunks)
            )
        x = np.vstack([p[0] for p in parts])
        iters = np.concatenate([p[2] for p in parts])
    else:
        x, _, iters = _descend_batch(x0, H.points, nn, opts)
    # exact final losses; a candidate that the approximate field failed to
    # improve keeps its (exact-loss) initialization
    f = _batch_loss(x, H.points, _TreeNN(P.points))
    wall = time.perf_counter() - t0
    refined = [
        PoseCandidate(Pose2(x[i, 0], x[i, 1:]), float(f[i]), inits[i].ncc_score)
        if f[i] <= inits[i].loss
        else inits[i]
        for i in range(len(inits))
    ]
    return _make_result(refined, int(iters.sum()), wall)


def _make_result(refined, iters, wall) -> RegistrationResult:
    order = sorted(range(len(refined)), key=lambda i: (refined[i].loss, i))
    ranked = tuple(refined[i] for i in order)
    return RegistrationResult(ranked[0], ranked, iters, wall)


# ---------------------------------------------------------------------------
# ICP baseline


def _fit_se2(src: np.ndarray, dst: np.ndarray) -> Pose2:
    sc = src.mean(axis=0)
    dc = dst.mean(axis=0)
    a = src - sc
    b = dst - dc
    sxx = float((a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]).sum())
    sxy = float((a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]).sum())
    theta = np.arctan2(sxy, sxx)
    c, s = np.cos(theta), np.sin(theta)
    t = dc - np.array([[c, -s], [s, c]]) @ sc
    return Pose2(theta, t)


def _icp_batch(x0: np.ndarray, points, tree, opts: IcpSettings):
    """Synchronous ICP over all candidate rows: one batched NN query per
    iteration, closed-form SE(2) fit per candidate."""
    k = x0.shape[0]
    poses = [Pose2(x0[i, 0], x0[i, 1:]) for i in range(k)]
    active = np.ones(k, dtype=bool)
    iters = np.zeros(k, dtype=np.int64)
    n = points.shape[0]
    keep_n = n
    if opts.trim_fraction > 0:
        keep_n = max(3, int(np.ceil((1.0 - opts.trim_fraction) * n)))
    for _ in range(opts.max_iters):
        idxs = np.flatnonzero(active)
        if idxs.size == 0:
            break
        iters[idxs] += 1
        moved = np.concatenate([se2_apply(poses[i], points) for i in idxs])
        d, nn = tree.query(moved)
        d = d.reshape(idxs.size, n)
        nn = nn.reshape(idxs.size, n)
        for row, i in enumerate(idxs):
            if keep_n < n:
                keep = np.argsort(d[row], kind="stable")[:keep_n]
            else:
                keep = slice(None)
            new_pose = _fit_se2(points[keep], tree.data[nn[row]][keep])
            delta_rot = abs(wrap_angle(new_pose.theta - poses[i].theta))
            delta_t = float(np.linalg.norm(new_pose.t - poses[i].t))
            poses[i] = new_pose
            if delta_rot < opts.tol and delta_t < opts.tol:
                active[i] = False
    moved = np.concatenate([se2_apply(p, points) for p in poses])
    d, _ = tree.query(moved)
    losses = d.reshape(k, n).mean(axis=1)
    return poses, losses, iters


def icp_register(
    H: PointCloud2,
    P: PointCloud2,
    inits: list[PoseCandidate],
    opts: IcpSettings | None = None,
) -> RegistrationResult:
    """Point-to-point ICP from each init with closed-form SE(2) updates
    and optional trimming; same result contract as optimize_poses."""
    if not inits:
        raise ValueError("inits must be non-empty")
    if len(H) == 0 or len(P) == 0:
        raise EmptyCloud("icp_register needs non-empty clouds")
    opts = opts or IcpSettings()
    tree = cKDTree(P.points)
    x0 = np.array([[c.pose.theta, c.pose.t[0], c.pose.t[1]] for c in inits])
    t0 = time.perf_counter()
    if opts.workers > 1:
        chunks = np.array_split(np.arange(len(inits)), opts.workers)
        chunks = [ch for ch in chunks if ch.size]
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            parts = list(
                pool.map(lambda ch: _icp_batch(x0[ch], H.points, tree, opts), chunks)
            )
        poses = [p for part in parts for p in part[0]]
        losses = np.concatenate([p[1] for p in parts])
        iters = np.concatenate([p[2] for p in parts])
    else:
        poses, losses, iters = _icp_batch(x0, H.points, tree, opts)
    wall = time.perf_counter() - t0
    refined = [
        PoseCandidate(poses[i], float(losses[i]), inits[i].ncc_score)
        for i in range(len(inits))
    ]
    return _make_result(refined, int(iters.sum()), wall)
