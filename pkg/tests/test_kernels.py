"""Numeric kernels: correctness oracles and numpy/numba twin equivalence."""

import numpy as np
import pytest

from floorloc import kernels
from floorloc.kernels import (
    _dda_numpy,
    _pip_numpy,
    _ray_segments_numpy,
    _ray_walls_numpy,
    grid_first_hits,
    points_in_polygon,
    ray_segment_distances,
    ray_wall_hits,
)

numba = pytest.importorskip("numba")


@pytest.fixture(scope="module")
def numba_impls():
    # the factories reference the module-level njit, which is only imported
    # when the numba backend is selected; inject it so the twins can be
    # built even under FLOORLOC_PURE_NUMPY=1
    kernels.njit = numba.njit
    return {
        "ray_segments": kernels._make_ray_segments_numba(),
        "dda": kernels._make_dda_numba(),
        "pip": kernels._make_pip_numba(),
        "ray_walls": kernels._make_ray_walls_numba(),
    }


class TestRaySegments:
    def test_hand_example(self):
        segs = np.array([[1.0, -1.0, 1.0, 1.0]])  # vertical segment at x=1
        dirs = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
        d = ray_segment_distances(np.zeros(2), dirs, segs, 10.0)
        assert d[0] == pytest.approx(1.0)
        assert np.isinf(d[1]) and np.isinf(d[2])

    def test_max_range_cutoff(self):
        segs = np.array([[5.0, -1.0, 5.0, 1.0]])
        d = ray_segment_distances(np.zeros(2), np.array([[1.0, 0.0]]), segs, 4.0)
        assert np.isinf(d[0])

    def test_empty_segments(self):
        d = ray_segment_distances(np.zeros(2), np.array([[1.0, 0.0]]), np.zeros((0, 4)), 5.0)
        assert np.isinf(d[0])

    def test_twin_bit_identical(self, numba_impls, rng):
        for _ in range(5):
            n, m = int(rng.integers(1, 50)), int(rng.integers(1, 30))
            ang = rng.uniform(0, 2 * np.pi, n)
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
            segs = rng.uniform(-5, 5, (m, 4))
            a = _ray_segments_numpy(0.3, -0.2, dirs, segs, 8.0)
            b = numba_impls["ray_segments"](0.3, -0.2, dirs, segs, 8.0)
            assert np.array_equal(a, b)


class TestGridFirstHits:
    def test_single_occupied_cell(self):
        occ = np.zeros((10, 10), dtype=bool)
        occ[5, 7] = True
        hits = grid_first_hits(occ, (2.5, 5.5), np.array([[1.0, 0.0], [-1.0, 0.0]]), 20.0)
        assert tuple(hits[0]) == (5, 7)
        assert tuple(hits[1]) == (-1, -1)

    def test_max_cells_cutoff(self):
        occ = np.zeros((4, 40), dtype=bool)
        occ[1, 30] = True
        hits = grid_first_hits(occ, (0.5, 1.5), np.array([[1.0, 0.0]]), 5.0)
        assert tuple(hits[0]) == (-1, -1)

    def test_twin_bit_identical(self, numba_impls, rng):
        for _ in range(5):
            occ = rng.random((20, 25)) < 0.1
            n = int(rng.integers(1, 40))
            ang = rng.uniform(0, 2 * np.pi, n)
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
            a = _dda_numpy(occ, 10.3, 9.7, dirs, 60.0)
            b = numba_impls["dda"](occ, 10.3, 9.7, dirs, 60.0)
            assert np.array_equal(a, b)


class TestRayWallHits:
    def test_z_range_gating(self):
        walls = np.array([[2.0, -1.0, 2.0, 1.0, 0.0, 1.0]])
        dirs = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 2.0]])  # second exits above z_hi
        t, idx = ray_wall_hits(np.array([0.0, 0.0, 0.5]), dirs, walls)
        assert t[0] == pytest.approx(2.0) and idx[0] == 0
        assert np.isinf(t[1]) and idx[1] == -1

    def test_nearest_wall_wins(self):
        walls = np.array(
            [[3.0, -1.0, 3.0, 1.0, 0.0, 2.0], [1.0, -1.0, 1.0, 1.0, 0.0, 2.0]]
        )
        t, idx = ray_wall_hits(np.array([0.0, 0.0, 0.5]), np.array([[1.0, 0.0, 0.0]]), walls)
        assert t[0] == pytest.approx(1.0) and idx[0] == 1

    def test_empty_walls(self):
        t, idx = ray_wall_hits(np.zeros(3), np.array([[1.0, 0.0, 0.0]]), np.zeros((0, 6)))
        assert np.isinf(t[0]) and idx[0] == -1

    def test_twin_bit_identical(self, numba_impls, rng):
        for _ in range(5):
            n, m = int(rng.integers(1, 40)), int(rng.integers(1, 20))
            dirs = rng.normal(size=(n, 3))
            walls = np.column_stack(
                [rng.uniform(-5, 5, (m, 4)), rng.uniform(-1, 0, m), rng.uniform(0.5, 3, m)]
            )
            a_t, a_i = _ray_walls_numpy(0.1, 0.2, 0.5, dirs, walls)
            b_t, b_i = numba_impls["ray_walls"](0.1, 0.2, 0.5, dirs, walls)
            assert np.array_equal(a_t, b_t) and np.array_equal(a_i, b_i)


class TestPointsInPolygon:
    def test_square_examples(self):
        square = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
        pts = np.array([[1.0, 1.0], [3.0, 1.0], [-0.5, 1.0], [1.0, 2.5]])
        assert list(points_in_polygon(pts, square)) == [True, False, False, False]

    def test_concave_polygon(self):
        lshape = np.array(
            [[0.0, 0.0], [4.0, 0.0], [4.0, 2.0], [2.0, 2.0], [2.0, 4.0], [0.0, 4.0]]
        )
        pts = np.array([[1.0, 3.0], [3.0, 3.0], [3.0, 1.0]])
        assert list(points_in_polygon(pts, lshape)) == [True, False, True]

    def test_matplotlib_oracle(self, rng):
        mpl_path = pytest.importorskip("matplotlib.path")
        for _ in range(5):
            poly = rng.uniform(0, 5, (int(rng.integers(3, 9)), 2))
            pts = rng.uniform(-1, 6, (200, 2))
            ours = points_in_polygon(pts, poly)
            theirs = mpl_path.Path(poly).contains_points(pts)
            assert np.array_equal(ours, theirs)

    def test_twin_bit_identical(self, numba_impls, rng):
        for _ in range(5):
            poly = rng.uniform(0, 5, (int(rng.integers(3, 12)), 2))
            pts = rng.uniform(-1, 6, (300, 2))
            a = _pip_numpy(pts, poly)
            b = numba_impls["pip"](pts, poly)
            assert np.array_equal(a, b)
