"""Shared fixtures and brute-force oracles used across the test suite."""

import numpy as np
import pytest

from floorloc import PointCloud2, Pose2, se2_apply


def brute_chamfer(X: np.ndarray, Y: np.ndarray) -> float:
    """O(|X|*|Y|) one-directional Chamfer distance, the oracle for the
    spatial-index implementation."""
    d = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=2)
    return float(d.min(axis=1).mean())


def random_cloud(rng: np.random.Generator, n: int, scale: float = 5.0) -> np.ndarray:
    return rng.uniform(-scale, scale, size=(n, 2))


def transform_cloud(pose: Pose2, pts: np.ndarray) -> PointCloud2:
    return PointCloud2(se2_apply(pose, pts))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
