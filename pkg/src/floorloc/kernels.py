"""Hot numeric kernels: ray-segment intersection, occupancy-grid DDA, point-in-polygon.

Every kernel has a pure-numpy implementation and a numba ``@njit`` twin.
Set ``FLOORLOC_PURE_NUMPY=1`` to force the numpy path (useful on machines
without a working numba, and for the benchmark in ``benchmarks/``).
Both paths compute the same arithmetic in the same order, so results are
bit-identical.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("FLOORLOC_PURE_NUMPY", "0") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

_EPS = 1e-12


# ---------------------------------------------------------------------------
# ray vs segment batch


def _ray_segments_numpy(ox, oy, dirs, segs, max_range):
    n = dirs.shape[0]
    out = np.full(n, np.inf)
    ax, ay = segs[:, 0], segs[:, 1]
    ex, ey = segs[:, 2] - ax, segs[:, 3] - ay
    for i in range(n):
        dx, dy = dirs[i, 0], dirs[i, 1]
        # solve o + t*d = a + s*e, t >= 0, 0 <= s <= 1
        denom = dx * ey - dy * ex
        ok = np.abs(denom) > _EPS
        wx, wy = ax - ox, ay - oy
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(ok, (wx * ey - wy * ex) / denom, np.inf)
            s = np.where(ok, (wx * dy - wy * dx) / denom, np.inf)
        t = np.where((t >= 0.0) & (s >= 0.0) & (s <= 1.0), t, np.inf)
        tmin = t.min() if t.size else np.inf
        if tmin <= max_range:
            out[i] = tmin
    return out


def _make_ray_segments_numba():
    @njit(cache=True, fastmath=False)
    def _ray_segments(ox, oy, dirs, segs, max_range):
        n = dirs.shape[0]
        m = segs.shape[0]
        out = np.full(n, np.inf)
        for i in range(n):
            dx = dirs[i, 0]
            dy = dirs[i, 1]
            tmin = np.inf
            for j in range(m):
                ax = segs[j, 0]
                ay = segs[j, 1]
                ex = segs[j, 2] - ax
                ey = segs[j, 3] - ay
                denom = dx * ey - dy * ex
                if abs(denom) <= _EPS:
                    continue
                wx = ax - ox
                wy = ay - oy
                t = (wx * ey - wy * ex) / denom
                s = (wx * dy - wy * dx) / denom
                if t >= 0.0 and 0.0 <= s <= 1.0 and t < tmin:
                    tmin = t
            if tmin <= max_range:
                out[i] = tmin
        return out

    return _ray_segments


def ray_segment_distances(origin, dirs, segments, max_range):
    """Distance along each unit-direction ray to the nearest segment.

    origin: (2,), dirs: (N,2) unit vectors, segments: (M,4) as x1,y1,x2,y2.
    Returns (N,) distances, inf where no hit within max_range.
    """
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    segments = np.ascontiguousarray(segments, dtype=np.float64)
    if segments.size == 0:
        return np.full(dirs.shape[0], np.inf)
    return _ray_segments_impl(float(origin[0]), float(origin[1]), dirs, segments, float(max_range))


# ---------------------------------------------------------------------------
# DDA traversal of a boolean occupancy grid


def _dda_numpy(occ, ox, oy, dirs, max_cells):
    nrow, ncol = occ.shape
    n = dirs.shape[0]
    out = np.full((n, 2), -1, dtype=np.int64)
    for i in range(n):
        dx, dy = dirs[i, 0], dirs[i, 1]
        col = int(np.floor(ox))
        row = int(np.floor(oy))
        step_c = 1 if dx > 0 else -1
        step_r = 1 if dy > 0 else -1
        # distance along ray to next vertical / horizontal cell border
        if dx > _EPS:
            t_max_c = (col + 1 - ox) / dx
            t_dc = 1.0 / dx
        elif dx < -_EPS:
            t_max_c = (col - ox) / dx
            t_dc = -1.0 / dx
        else:
            t_max_c = np.inf
            t_dc = np.inf
        if dy > _EPS:
            t_max_r = (row + 1 - oy) / dy
            t_dr = 1.0 / dy
        elif dy < -_EPS:
            t_max_r = (row - oy) / dy
            t_dr = -1.0 / dy
        else:
            t_max_r = np.inf
            t_dr = np.inf
        t = 0.0
        while t <= max_cells:
            if 0 <= row < nrow and 0 <= col < ncol and occ[row, col]:
                out[i, 0] = row
                out[i, 1] = col
                break
            if t_max_c < t_max_r:
                t = t_max_c
                t_max_c += t_dc
                col += step_c
            else:
                t = t_max_r
                t_max_r += t_dr
                row += step_r
            if (col < 0 and step_c < 0) or (col >= ncol and step_c > 0):
                if (row < 0 and step_r < 0) or (row >= nrow and step_r > 0):
                    break
    return out


def _make_dda_numba():
    @njit(cache=True, fastmath=False)
    def _dda(occ, ox, oy, dirs, max_cells):
        nrow, ncol = occ.shape
        n = dirs.shape[0]
        out = np.full((n, 2), -1, dtype=np.int64)
        for i in range(n):
            dx = dirs[i, 0]
            dy = dirs[i, 1]
            col = int(np.floor(ox))
            row = int(np.floor(oy))
            step_c = 1 if dx > 0 else -1
            step_r = 1 if dy > 0 else -1
            if dx > _EPS:
                t_max_c = (col + 1 - ox) / dx
                t_dc = 1.0 / dx
            elif dx < -_EPS:
                t_max_c = (col - ox) / dx
                t_dc = -1.0 / dx
            else:
                t_max_c = np.inf
                t_dc = np.inf
            if dy > _EPS:
                t_max_r = (row + 1 - oy) / dy
                t_dr = 1.0 / dy
            elif dy < -_EPS:
                t_max_r = (row - oy) / dy
                t_dr = -1.0 / dy
            else:
                t_max_r = np.inf
                t_dr = np.inf
            t = 0.0
            while t <= max_cells:
                if 0 <= row < nrow and 0 <= col < ncol and occ[row, col]:
                    out[i, 0] = row
                    out[i, 1] = col
                    break
                if t_max_c < t_max_r:
                    t = t_max_c
                    t_max_c += t_dc
                    col += step_c
                else:
                    t = t_max_r
                    t_max_r += t_dr
                    row += step_r
                if (col < 0 and step_c < 0) or (col >= ncol and step_c > 0):
                    if (row < 0 and step_r < 0) or (row >= nrow and step_r > 0):
                        break
        return out

    return _dda


def grid_first_hits(occ, origin_cell, dirs, max_cells):
    """March rays through a boolean grid, return (row, col) of the first
    occupied cell per ray, or (-1, -1) when none within max_cells.

    origin_cell: (2,) fractional (col, row) grid coordinates of the ray
    origin. dirs: (N,2) unit vectors in grid axes (x = col, y = row).
    """
    occ = np.ascontiguousarray(occ, dtype=np.bool_)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    return _dda_impl(occ, float(origin_cell[0]), float(origin_cell[1]), dirs, float(max_cells))


# ---------------------------------------------------------------------------
# 3D ray vs vertical wall rectangles (xy segment extruded over a z range)


def _ray_walls_numpy(ox, oy, oz, dirs, walls):
    n = dirs.shape[0]
    t_out = np.full(n, np.inf)
    idx_out = np.full(n, -1, dtype=np.int64)
    ax, ay = walls[:, 0], walls[:, 1]
    ex, ey = walls[:, 2] - ax, walls[:, 3] - ay
    z0, z1 = walls[:, 4], walls[:, 5]
    for i in range(n):
        dx, dy, dz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
        denom = dx * ey - dy * ex
        ok = np.abs(denom) > _EPS
        wx, wy = ax - ox, ay - oy
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(ok, (wx * ey - wy * ex) / denom, np.inf)
            s = np.where(ok, (wx * dy - wy * dx) / denom, np.inf)
        z = oz + t * dz
        valid = (t > _EPS) & (s >= 0.0) & (s <= 1.0) & (z >= z0) & (z <= z1)
        t = np.where(valid, t, np.inf)
        j = int(t.argmin()) if t.size else -1
        if j >= 0 and np.isfinite(t[j]):
            t_out[i] = t[j]
            idx_out[i] = j
    return t_out, idx_out


def _make_ray_walls_numba():
    @njit(cache=True, fastmath=False)
    def _ray_walls(ox, oy, oz, dirs, walls):
        n = dirs.shape[0]
        m = walls.shape[0]
        t_out = np.full(n, np.inf)
        idx_out = np.full(n, -1, dtype=np.int64)
        for i in range(n):
            dx = dirs[i, 0]
            dy = dirs[i, 1]
            dz = dirs[i, 2]
            tbest = np.inf
            jbest = -1
            for j in range(m):
                ax = walls[j, 0]
                ay = walls[j, 1]
                ex = walls[j, 2] - ax
                ey = walls[j, 3] - ay
                denom = dx * ey - dy * ex
                if abs(denom) <= _EPS:
                    continue
                wx = ax - ox
                wy = ay - oy
                t = (wx * ey - wy * ex) / denom
                if t <= _EPS or t >= tbest:
                    continue
                s = (wx * dy - wy * dx) / denom
                if s < 0.0 or s > 1.0:
                    continue
                z = oz + t * dz
                if z < walls[j, 4] or z > walls[j, 5]:
                    continue
                tbest = t
                jbest = j
            if jbest >= 0:
                t_out[i] = tbest
                idx_out[i] = jbest
        return t_out, idx_out

    return _ray_walls


def ray_wall_hits(origin, dirs, walls):
    """First intersection of 3D rays with vertical wall rectangles.

    walls: (M,6) rows x1,y1,x2,y2,z_lo,z_hi. Returns (t, wall_index) per
    ray; t is the ray parameter (dirs need not be unit), inf / -1 on miss.
    """
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    walls = np.ascontiguousarray(walls, dtype=np.float64)
    if walls.size == 0:
        n = dirs.shape[0]
        return np.full(n, np.inf), np.full(n, -1, dtype=np.int64)
    return _ray_walls_impl(
        float(origin[0]), float(origin[1]), float(origin[2]), dirs, walls
    )


# ---------------------------------------------------------------------------
# point in polygon (even-odd rule)


def _pip_numpy(pts, poly):
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(pts.shape[0], dtype=np.bool_)
    m = poly.shape[0]
    j = m - 1
    for k in range(m):
        yk, yj = poly[k, 1], poly[j, 1]
        crosses = (yk > y) != (yj > y)
        if yj != yk:
            xint = poly[k, 0] + (y - yk) / (yj - yk) * (poly[j, 0] - poly[k, 0])
            inside ^= crosses & (x < xint)
        j = k
    return inside


def _make_pip_numba():
    @njit(cache=True, fastmath=False)
    def _pip(pts, poly):
        n = pts.shape[0]
        m = poly.shape[0]
        inside = np.zeros(n, dtype=np.bool_)
        for i in range(n):
            x = pts[i, 0]
            y = pts[i, 1]
            c = False
            j = m - 1
            for k in range(m):
                yk = poly[k, 1]
                yj = poly[j, 1]
                if (yk > y) != (yj > y):
                    xint = poly[k, 0] + (y - yk) / (yj - yk) * (poly[j, 0] - poly[k, 0])
                    if x < xint:
                        c = not c
                j = k
            inside[i] = c
        return inside

    return _pip


def points_in_polygon(points, polygon):
    """Even-odd containment test for a batch of 2D points."""
    points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    polygon = np.ascontiguousarray(polygon, dtype=np.float64)
    return _pip_impl(points, polygon)


if USE_NUMBA:
    _ray_segments_impl = _make_ray_segments_numba()
    _dda_impl = _make_dda_numba()
    _pip_impl = _make_pip_numba()
    _ray_walls_impl = _make_ray_walls_numba()
else:
    _ray_segments_impl = _ray_segments_numpy
    _dda_impl = _dda_numpy
    _pip_impl = _pip_numpy
    _ray_walls_impl = _ray_walls_numpy
