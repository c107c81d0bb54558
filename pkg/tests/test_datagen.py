"""Procedural scenes and synthetic trial bundles."""

import numpy as np
import pytest

from floorloc.config import DatasetConfig, LidarConfig, SensorConfig
from floorloc.datagen import (
    generate_dataset,
    generate_trial,
    random_rectilinear_polygon,
    square_scene,
    trial_fractions,
    _remove_low_sector,
)
from floorloc.errors import InvalidSpec
from floorloc.geometry import PointCloud3, se2_apply
from floorloc.kernels import points_in_polygon
from floorloc.scene import _self_intersects

SPEC = DatasetConfig(num_trials=2, seed=0)
SENSOR = SensorConfig()
LIDAR = LidarConfig()


@pytest.fixture(scope="module")
def bundle():
    return generate_trial(0, SPEC, SENSOR, LIDAR)


class TestScenes:
    def test_square_scene_four_fold_symmetric(self):
        poly = square_scene(5.0).floor_polygon
        rot = poly @ np.array([[0.0, 1.0], [-1.0, 0.0]])  # 90-degree turn
        for v in rot:
            assert np.min(np.linalg.norm(poly - v, axis=1)) < 1e-12

    def test_random_polygon_rectilinear_and_simple(self):
        for seed in range(10):
            poly = random_rectilinear_polygon(np.random.default_rng(seed), 5.0, 9.0)
            edges = np.diff(np.vstack([poly, poly[:1]]), axis=0)
            # every edge is axis-aligned
            assert np.all((edges[:, 0] == 0) | (edges[:, 1] == 0))
            assert not _self_intersects(poly)

    def test_obstacles_inside_floor(self, bundle):
        for ob in bundle.scene.obstacles:
            assert np.all(points_in_polygon(ob.footprint, bundle.scene.floor_polygon))


class TestDeterminism:
    def test_trials_bit_identical(self):
        a = generate_trial(1, SPEC, SENSOR, LIDAR)
        b = generate_trial(1, SPEC, SENSOR, LIDAR)
        assert np.array_equal(a.cloud.points, b.cloud.points)
        assert np.array_equal(a.lidar_map.points, b.lidar_map.points)
        assert a.gt.theta == b.gt.theta and np.array_equal(a.gt.t, b.gt.t)

    def test_trials_differ_across_indices(self):
        a = generate_trial(0, SPEC, SENSOR, LIDAR)
        b = generate_trial(1, SPEC, SENSOR, LIDAR)
        assert a.cloud.points.shape != b.cloud.points.shape or not np.array_equal(
            a.cloud.points, b.cloud.points
        )


class TestBundleFrames:
    def test_gt_maps_cloud_into_scene_bounds(self, bundle):
        pts = se2_apply(bundle.gt, bundle.cloud.points[:, :2])
        lo = bundle.scene.floor_polygon.min(axis=0) - 0.1
        hi = bundle.scene.floor_polygon.max(axis=0) + 0.1
        assert np.all(pts >= lo) and np.all(pts <= hi)

    def test_cloud_is_labeled(self, bundle):
        assert bundle.cloud.labels is not None
        assert set(np.unique(bundle.cloud.labels)) <= set(range(6))

    def test_cameras_in_reconstruction_frame(self, bundle):
        cam_xy = np.array([c.t[:2] for c in bundle.cams])
        scene_xy = se2_apply(bundle.gt, cam_xy)
        assert np.all(points_in_polygon(scene_xy, bundle.scene.floor_polygon))


@pytest.fixture(scope="module")
def scene_cloud(bundle):
    # sector removal operates in the scene frame
    pts = bundle.cloud.points.copy()
    pts[:, :2] = se2_apply(bundle.gt, pts[:, :2])
    return PointCloud3(pts, labels=bundle.cloud.labels)


class TestLowCoverage:
    def test_zero_fraction_is_noop(self, bundle, scene_cloud, rng):
        out = _remove_low_sector(scene_cloud, bundle.scene, 0.0, rng)
        assert out is scene_cloud

    def test_sector_removal_spares_floor(self, bundle, scene_cloud):
        cut = _remove_low_sector(scene_cloud, bundle.scene, 0.9, np.random.default_rng(0))
        assert len(cut) < len(scene_cloud)
        floor_before = np.sum(scene_cloud.points[:, 2] <= 0.02)
        floor_after = np.sum(cut.points[:, 2] <= 0.02)
        assert floor_after == floor_before

    def test_fraction_monotone_in_removed_mass(self, bundle, scene_cloud):
        sizes = []
        for f in (0.2, 0.5, 0.9):
            out = _remove_low_sector(
                scene_cloud, bundle.scene, f, np.random.default_rng(3)
            )
            sizes.append(len(out))
        assert sizes[0] > sizes[1] > sizes[2]

    def test_trial_fractions(self):
        assert trial_fractions(DatasetConfig(num_trials=3, low_coverage_fraction=0.5)) == [
            0.5,
            0.5,
            0.5,
        ]
        spread = trial_fractions(DatasetConfig(num_trials=5, low_coverage_fraction=-0.8))
        assert spread == pytest.approx([0.0, 0.2, 0.4, 0.6, 0.8])


class TestValidation:
    def test_zero_trials_rejected(self):
        with pytest.raises(InvalidSpec):
            list(generate_dataset(DatasetConfig(num_trials=0), SENSOR, LIDAR))

    def test_fraction_out_of_range_rejected(self):
        with pytest.raises(InvalidSpec):
            list(
                generate_dataset(
                    DatasetConfig(num_trials=1, low_coverage_fraction=1.0), SENSOR, LIDAR
                )
            )
