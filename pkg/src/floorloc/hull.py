"""Concave hull of a 2D point set via the k-nearest-neighbors walk.

Starts from the lowest point and repeatedly turns as far clockwise as
possible among the k nearest unvisited neighbors, growing k until the
walk closes into a simple polygon containing every input point. Falls
back to the convex hull when no k succeeds.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from . import kernels


def concave_hull(points: np.ndarray, k: int = 3, max_points: int = 800) -> np.ndarray:
    """Return hull vertices (closed implicitly) snapped to input points.

    Inputs larger than ``max_points`` are thinned on a coarse grid first
    (one representative point per cell); the walk is quadratic in the
    worst case, so unbounded inputs are not practical.
    """
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 2), axis=0)
    pts = _thin_to(pts, max_points)
    n = pts.shape[0]
    if n < 3:
        return pts.copy()
    k = max(3, min(k, n - 1))
    while k < n:
        hull = _knn_hull(pts, k)
        if hull is not None and _contains_all(hull, pts):
            return hull
        k = max(k + 1, int(k * 1.5))  # multiplicative growth bounds attempts
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def _thin_to(pts: np.ndarray, max_points: int) -> np.ndarray:
    if pts.shape[0] <= max_points:
        return pts
    lo = pts.min(axis=0)
    span = np.maximum(pts.max(axis=0) - lo, 1e-9)
    cell = float(np.sqrt(span[0] * span[1] / max_points))
    while True:
        idx = np.floor((pts - lo) / cell).astype(np.int64)
        _, keep = np.unique(idx, axis=0, return_index=True)
        if keep.size <= max_points:
            return pts[np.sort(keep)]
        cell *= 1.3


def _knn_hull(pts: np.ndarray, k: int) -> np.ndarray | None:
    n = pts.shape[0]
    tree = cKDTree(pts)
    start = int(np.lexsort((pts[:, 0], pts[:, 1]))[0])  # lowest y, then x
    hull_idx = [start]
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    current = start
    prev_angle = 0.0  # incoming direction; start walking rightward
    step = 0
    max_steps = 4 * n
    while step < max_steps:
        step += 1
        if step >= 3:
            visited[start] = False  # closing the loop is allowed again
        kk = min(k + 1, n)
        _, nbrs = tree.query(pts[current], k=kk)
        nbrs = np.atleast_1d(nbrs)
        cands = [j for j in nbrs if j != current and not visited[j]]
        if not cands:
            return None
        # sort by largest clockwise turn from the incoming direction
        angles = []
        for j in cands:
            v = pts[j] - pts[current]
            a = np.arctan2(v[1], v[0])
            turn = (prev_angle - a) % (2.0 * np.pi)
            angles.append((turn, j))
        angles.sort(key=lambda x: x[0])
        chosen = None
        for _, j in angles:
            if not _crosses_hull(pts, hull_idx, j):
                chosen = j
                break
        if chosen is None:
            return None
        if chosen == start:
            return pts[np.array(hull_idx)]
        v = pts[chosen] - pts[current]
        prev_angle = np.arctan2(v[1], v[0]) + np.pi  # incoming dir at new vertex
        hull_idx.append(chosen)
        visited[chosen] = True
        current = chosen
    return None


def _crosses_hull(pts, hull_idx, j) -> bool:
    a = pts[hull_idx[-1]]
    b = pts[j]
    for i in range(len(hull_idx) - 2):
        c = pts[hull_idx[i]]
        d = pts[hull_idx[i + 1]]
        if j == hull_idx[i] or j == hull_idx[i + 1]:
            continue
        if _cross(a, b, c, d):
            return True
    return False


def _cross(a, b, c, d) -> bool:
    r = b - a
    s = d - c
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < 1e-12:
        return False
    q = c - a
    t = (q[0] * s[1] - q[1] * s[0]) / denom
    u = (q[0] * r[1] - q[1] * r[0]) / denom
    return 1e-9 < t < 1 - 1e-9 and 1e-9 < u < 1 - 1e-9


def _contains_all(hull: np.ndarray, pts: np.ndarray, tol: float = 1e-9) -> bool:
    if hull.shape[0] < 3:
        return False
    inside = kernels.points_in_polygon(pts, hull)
    if np.all(inside):
        return True
    # boundary points can fail the even-odd test; allow points on an edge
    outside = pts[~inside]
    return bool(np.all(_dist_to_polyline(outside, hull) <= max(tol, 1e-9)))


def _dist_to_polyline(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    closed = np.vstack([poly, poly[:1]])
    a = closed[:-1]
    b = closed[1:]
    ab = b - a
    denom = (ab * ab).sum(axis=1)
    denom[denom == 0] = 1.0
    ap = pts[:, None, :] - a[None, :, :]
    t = np.clip((ap * ab).sum(axis=2) / denom, 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d2 = ((pts[:, None, :] - proj) ** 2).sum(axis=2)
    return np.sqrt(d2.min(axis=1))


def sample_polyline(vertices: np.ndarray, spacing: float, closed: bool = True) -> np.ndarray:
    """Points every ``spacing`` meters of arc length along a polyline."""
    v = np.asarray(vertices, dtype=np.float64)
    if closed:
        v = np.vstack([v, v[:1]])
    seg = np.diff(v, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    total = seg_len.sum()
    if total <= 0:
        return v[:1].copy()
    s = np.arange(0.0, total, spacing)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg_len) - 1)
    frac = (s - cum[idx]) / np.where(seg_len[idx] > 0, seg_len[idx], 1.0)
    return v[idx] + frac[:, None] * seg[idx]
