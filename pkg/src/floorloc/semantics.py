"""Multi-view semantic label fusion: per-frame class distributions are
combined per 3D point by confidence-weighted voting, with a depth-buffer
visibility test deciding which frames observe each point."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ZeroConfidenceGroup
from .geometry import CameraModel, PointCloud3, Pose3


@dataclass(frozen=True)
class ClassDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
            raise ValueError("probs must be non-negative and sum to 1")
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class SemanticObservation:
    point_index: int
    frame_index: int
    dist: ClassDistribution
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")


@dataclass(frozen=True)
class LabeledCloud:
    cloud: PointCloud3
    labels: np.ndarray
    label_scores: np.ndarray


def visible_frames(
    point: np.ndarray,
    cams: list[Pose3],
    camera: CameraModel,
    depth_maps: list[np.ndarray],
    eps: float = 0.03,
) -> list[int]:
    """Frames whose depth buffer agrees with the point's projected depth
    within ``eps``: the point projects in-image, in front of the camera,
    and is not occluded by recorded geometry."""
    point = np.asarray(point, dtype=np.float64).reshape(3)
    out = []
    for i, (cam, dm) in enumerate(zip(cams, depth_maps)):
        local = cam.rotation.T @ (point - cam.t)
        z = local[2]
        if z <= 0:
            continue
        h, w = dm.shape
        fx = (w / 2.0) / np.tan(camera.hfov / 2.0)
        fy = (h / 2.0) / np.tan(camera.vfov / 2.0)
        u = int(round(fx * local[0] / z + (w - 1) / 2.0))
        v = int(round(fy * local[1] / z + (h - 1) / 2.0))
        if not (0 <= u < w and 0 <= v < h):
            continue
        recorded = dm[v, u]
        if recorded <= 0:
            continue
        if abs(z - recorded) <= eps:
            out.append(i)
    return out


def fuse_labels(
    observations: list[SemanticObservation],
    num_points: int | None = None,
    unknown_class: int = -1,
    on_zero_confidence: str = "unknown",
) -> tuple[np.ndarray, np.ndarray]:
    """Confidence-weighted vote per point: weights are the normalized
    confidences, the label is the argmax of the weighted probability sum.
    Ties break to the lowest class id. A point whose confidences sum to
    zero gets ``unknown_class`` (score 0), or raises ZeroConfidenceGroup
    with ``on_zero_confidence="raise"``.

    Returns (labels, scores) where scores are the fused max probability.
    """
    if num_points is None:
        n = max((o.point_index for o in observations), default=-1) + 1
    else:
        n = num_points
    groups: dict[int, list[SemanticObservation]] = {}
    for o in observations:
        groups.setdefault(o.point_index, []).append(o)
    labels = np.full(n, unknown_class, dtype=np.int64)
    scores = np.zeros(n, dtype=np.float64)
    for pi, group in groups.items():
        conf = np.array([o.confidence for o in group])
        total = conf.sum()
        if total == 0:
            if on_zero_confidence == "raise":
                raise ZeroConfidenceGroup(f"point {pi} has zero total confidence")
            continue
        w = conf / total
        probs = np.stack([o.dist.probs for o in group])
        fused = w @ probs
        top = float(fused.max())
        # ties (up to rounding noise) break to the lowest class id
        labels[pi] = int(np.flatnonzero(fused >= top - 1e-12)[0])
        scores[pi] = top
    return labels, scores


def fuse_cloud(
    cloud: PointCloud3, observations: list[SemanticObservation], unknown_class: int = -1
) -> LabeledCloud:
    labels, scores = fuse_labels(observations, num_points=len(cloud), unknown_class=unknown_class)
    return LabeledCloud(cloud, labels, scores)


# ---------------------------------------------------------------------------
# synthetic observation source


def emulate_observations(
    true_labels: np.ndarray,
    num_classes: int,
    *,
    label_noise: float = 0.1,
    frames_per_point: int = 3,
    seed: int = 0,
) -> list[SemanticObservation]:
    """Derive per-point class distributions from ground-truth labels with
    symmetric label noise (probability mass ``label_noise`` spread evenly
    over the wrong classes) and confidences ~ Uniform(0.5, 1)."""
    rng = np.random.default_rng(seed)
    obs = []
    for pi, lab in enumerate(np.asarray(true_labels, dtype=np.int64)):
        for fi in range(frames_per_point):
            probs = np.full(num_classes, label_noise / max(num_classes - 1, 1))
            probs[lab] = 1.0 - label_noise
            # jitter then renormalize so distributions differ across frames
            probs = probs + rng.uniform(0.0, 0.02, size=num_classes)
            probs /= probs.sum()
            conf = float(rng.uniform(0.5, 1.0))
            obs.append(SemanticObservation(pi, fi, ClassDistribution(probs), conf))
    return obs


# ---------------------------------------------------------------------------
# observation file I/O (JSON lines, one record per observation)


def save_observations(path, observations: list[SemanticObservation]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for o in observations:
            rec = {
                "point_index": o.point_index,
                "frame_index": o.frame_index,
                "probs": o.dist.probs.tolist(),
                "confidence": o.confidence,
            }
            f.write(json.dumps(rec) + "\n")


def load_observations(path) -> list[SemanticObservation]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(
                SemanticObservation(
                    int(rec["point_index"]),
                    int(rec["frame_index"]),
                    ClassDistribution(np.array(rec["probs"])),
                    float(rec["confidence"]),
                )
            )
    return out
