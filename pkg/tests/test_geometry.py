"""Pose algebra, floor-plane fitting, and camera downprojection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floorloc import (
    CameraModel,
    Plane,
    PointCloud3,
    Pose2,
    Pose3,
    downproject_cameras,
    fit_floor_plane,
    pose_error,
    se2_apply,
    se2_compose,
    se2_inverse,
)
from floorloc.errors import InsufficientFloorPoints
from floorloc.geometry import to_floor_frame, wrap_angle


def rot2(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def homog(pose):
    m = np.eye(3)
    m[:2, :2] = rot2(pose.theta)
    m[:2, 2] = pose.t
    return m


poses = st.tuples(
    st.floats(-10, 10, allow_nan=False),
    st.floats(-50, 50, allow_nan=False),
    st.floats(-50, 50, allow_nan=False),
).map(lambda v: Pose2(v[0], np.array(v[1:])))


class TestSE2:
    def test_apply_identity(self):
        assert np.allclose(se2_apply(Pose2.identity(), [3.5, -1.0]), [3.5, -1.0])

    def test_apply_quarter_turn(self):
        assert np.allclose(se2_apply(Pose2(np.pi / 2, [0, 0]), [1, 0]), [0, 1], atol=1e-12)

    def test_apply_matches_matrix_oracle(self):
        p = Pose2(np.pi / 2, [2, 1])
        expected = rot2(np.pi / 2) @ np.array([1.0, 0.0]) + np.array([2.0, 1.0])
        got = se2_apply(p, [1, 0])
        assert np.allclose(got, expected, atol=1e-12)
        assert np.allclose(got, [2, 2], atol=1e-12)

    def test_compose_identity(self):
        b = Pose2(0.7, [1.5, -2.0])
        out = se2_compose(Pose2.identity(), b)
        assert out.theta == pytest.approx(b.theta) and np.allclose(out.t, b.t)

    def test_compose_with_inverse_is_identity(self):
        b = Pose2(2.2, [3.0, -1.0])
        out = se2_compose(se2_inverse(b), b)
        assert abs(out.theta) < 1e-9 and np.linalg.norm(out.t) < 1e-9

    def test_compose_matches_homogeneous_product(self):
        a = Pose2(np.pi / 2, [1, 0])
        b = Pose2(np.pi / 2, [1, 0])
        out = se2_compose(a, b)
        m = homog(a) @ homog(b)
        assert out.theta == pytest.approx(np.pi, abs=1e-12)
        assert np.allclose(out.t, m[:2, 2], atol=1e-12)
        assert np.allclose(out.t, [1, 1], atol=1e-12)

    def test_theta_normalized_into_half_open_interval(self):
        assert Pose2(3 * np.pi, [0, 0]).theta == pytest.approx(np.pi)
        assert Pose2(-np.pi, [0, 0]).theta == pytest.approx(np.pi)
        assert wrap_angle(np.pi) == pytest.approx(np.pi)
        assert wrap_angle(-np.pi) == pytest.approx(np.pi)

    @given(poses, poses, st.floats(-20, 20), st.floats(-20, 20))
    @settings(deadline=None, max_examples=200)
    def test_compose_apply_associativity(self, p, q, x, y):
        v = np.array([x, y])
        lhs = se2_apply(se2_compose(p, q), v)
        rhs = se2_apply(p, se2_apply(q, v))
        assert np.allclose(lhs, rhs, atol=1e-9)

    @given(poses)
    @settings(deadline=None, max_examples=200)
    def test_inverse_roundtrip(self, p):
        out = se2_compose(p, se2_inverse(p))
        assert abs(out.theta) < 1e-9 and np.linalg.norm(out.t) < 1e-9


class TestPoseError:
    def test_identity(self):
        gt = Pose2(0.4, [1, 2])
        assert pose_error(gt, gt) == (0.0, 0.0)

    def test_constructed_offsets(self):
        gt = Pose2(0.4, [1.0, 2.0])
        delta = np.array([0.3, 0.0])
        pred = Pose2(gt.theta + np.radians(10), gt.t + delta)
        rot, trans = pose_error(pred, gt)
        assert rot == pytest.approx(10.0, abs=1e-9)
        assert trans == pytest.approx(0.3, abs=1e-12)

    def test_angle_wrapping(self):
        gt = Pose2(0.0, [0, 0])
        pred = Pose2(np.radians(350.0), [0, 0])
        rot, _ = pose_error(pred, gt)
        assert rot == pytest.approx(10.0, abs=1e-9)

    @given(poses, poses)
    @settings(deadline=None, max_examples=100)
    def test_rotation_magnitude_symmetric(self, p, q):
        assert pose_error(p, q)[0] == pytest.approx(pose_error(q, p)[0], abs=1e-9)


def _floor_cloud(rng, n=1000, outlier_frac=0.0):
    pts = np.column_stack([rng.uniform(-5, 5, (n, 2)), np.zeros(n)])
    labels = np.zeros(n, dtype=np.int64)
    n_out = int(n * outlier_frac)
    if n_out:
        idx = rng.choice(n, n_out, replace=False)
        pts[idx, 2] = rng.uniform(0.5, 2.0, n_out)
    return PointCloud3(pts, labels=labels), pts, labels


class TestFloorPlane:
    def test_exact_plane(self, rng):
        cloud, _, _ = _floor_cloud(rng)
        plane = fit_floor_plane(cloud, floor_class=0)
        assert np.allclose(np.abs(plane.normal), [0, 0, 1], atol=1e-6)
        assert abs(plane.offset) < 1e-6

    def test_ransac_rejects_outliers(self, rng):
        cloud, pts, _ = _floor_cloud(rng, outlier_frac=0.1)
        plane = fit_floor_plane(cloud, floor_class=0)
        # oracle: least squares on the true inliers only
        inl = pts[pts[:, 2] == 0.0]
        centroid = inl.mean(axis=0)
        _, _, vt = np.linalg.svd(inl - centroid, full_matrices=False)
        normal = vt[2] if vt[2][2] > 0 else -vt[2]
        got = plane.normal if plane.normal[2] > 0 else -plane.normal
        assert np.allclose(got, normal, atol=1e-3)
        assert abs(plane.offset) < 1e-3

    def test_too_few_floor_points(self, rng):
        pts = np.column_stack([rng.uniform(-5, 5, (20, 2)), np.zeros(20)])
        cloud = PointCloud3(pts, labels=np.zeros(20, dtype=np.int64))
        with pytest.raises(InsufficientFloorPoints):
            fit_floor_plane(cloud, floor_class=0)

    def test_covariant_under_rigid_transform(self, rng):
        cloud, pts, labels = _floor_cloud(rng, outlier_frac=0.05)
        plane = fit_floor_plane(cloud, floor_class=0, seed=3)
        # rotate the whole cloud 30 degrees about x and shift it
        a = np.radians(30)
        r = np.array([[1, 0, 0], [0, np.cos(a), -np.sin(a)], [0, np.sin(a), np.cos(a)]])
        shift = np.array([0.5, -1.0, 2.0])
        moved = PointCloud3(pts @ r.T + shift, labels=labels)
        plane2 = fit_floor_plane(moved, floor_class=0, seed=3)
        expected_normal = r @ plane.normal
        expected_offset = plane.offset - expected_normal @ shift
        assert np.allclose(plane2.normal, expected_normal, atol=1e-3)
        assert plane2.offset == pytest.approx(expected_offset, abs=1e-3)

    def test_floor_frame_roundtrip(self, rng):
        cloud, _, _ = _floor_cloud(rng)
        plane = fit_floor_plane(cloud, floor_class=0)
        z = to_floor_frame(cloud.points, plane)[:, 2]
        assert np.all(np.abs(z) < 1e-6)


def _cam(position, yaw, pitch_down=0.0, roll=0.0):
    """Camera with +z optical axis at the given yaw/pitch; +x right, +y down."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch_down), np.sin(pitch_down)
    z_axis = np.array([cy * cp, sy * cp, -sp])
    x_axis = np.array([sy, -cy, 0.0]) if abs(cp) > 1e-9 else np.array([sy, -cy, 0.0])
    y_axis = np.cross(z_axis, x_axis)
    r = np.stack([x_axis, y_axis, z_axis], axis=1)
    if roll:
        cr, sr = np.cos(roll), np.sin(roll)
        r = r @ np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return Pose3(r, np.asarray(position, dtype=np.float64))


FLOOR = Plane([0, 0, 1], 0.0)


class TestDownprojection:
    def test_horizontal_camera(self):
        cam = _cam([1.0, 2.0, 1.5], yaw=0.0)
        (pose, valid), = downproject_cameras([cam], FLOOR, 0.1)
        assert valid
        assert pose.theta == pytest.approx(0.0, abs=1e-9)
        assert np.allclose(pose.t, [1.0, 2.0], atol=1e-9)

    def test_straight_down_is_degenerate(self):
        cam = _cam([0, 0, 2.0], yaw=0.0, pitch_down=np.pi / 2)
        (_, valid), = downproject_cameras([cam], FLOOR, 0.1)
        assert not valid

    def test_pitched_camera_keeps_yaw(self):
        cam = _cam([0, 0, 1.5], yaw=np.radians(45), pitch_down=np.radians(30))
        (pose, valid), = downproject_cameras([cam], FLOOR, 0.1)
        assert valid
        # oracle: project the optical axis onto the floor and take atan2
        axis = cam.optical_axis
        expected = np.arctan2(axis[1], axis[0])
        assert pose.theta == pytest.approx(expected, abs=1e-6)
        assert pose.theta == pytest.approx(np.radians(45), abs=1e-6)

    def test_yaw_invariant_to_roll(self):
        for roll in (0.3, -1.0, 2.0):
            base = _cam([0, 0, 1.5], yaw=0.7, pitch_down=0.4)
            rolled = _cam([0, 0, 1.5], yaw=0.7, pitch_down=0.4, roll=roll)
            (p0, _), = downproject_cameras([base], FLOOR, 0.1)
            (p1, _), = downproject_cameras([rolled], FLOOR, 0.1)
            assert p1.theta == pytest.approx(p0.theta, abs=1e-6)


class TestTypeInvariants:
    def test_pose3_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Pose3(np.eye(3) * 2.0, np.zeros(3))
        with pytest.raises(ValueError):
            Pose3(np.diag([1.0, 1.0, -1.0]), np.zeros(3))  # det = -1

    def test_camera_model_bounds(self):
        with pytest.raises(ValueError):
            CameraModel(hfov=0.0, vfov=1.0, max_range=5.0)
        with pytest.raises(ValueError):
            CameraModel(hfov=1.0, vfov=1.0, max_range=0.0)

    def test_plane_normal_unit(self):
        p = Plane([0, 0, 2.0], 1.0)
        assert np.linalg.norm(p.normal) == pytest.approx(1.0, abs=1e-9)

    def test_cloud_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            PointCloud3([[0.0, 0.0, np.nan]])
