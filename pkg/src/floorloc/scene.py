"""Ground-truth scenes: a floor polygon with extruded, labeled obstacles.

Scenes are the simulation substrate: walls and obstacle footprints are
sliced at sensor height for 2D LiDAR simulation, and the full extruded
geometry is ray-cast in 3D when synthesizing reconstructions and oracle
completions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass(frozen=True)
class Obstacle:
    footprint: np.ndarray  # (K,2) closed implicitly
    z_min: float
    z_max: float
    class_id: int

    def __post_init__(self):
        fp = np.asarray(self.footprint, dtype=np.float64).reshape(-1, 2)
        if fp.shape[0] < 3:
            raise ValueError("footprint needs >= 3 vertices")
        if polygon_area(fp) == 0.0:
            raise ValueError("footprint has zero area")
        if not self.z_min < self.z_max:
            raise ValueError("z_min must be < z_max")
        object.__setattr__(self, "footprint", fp)


@dataclass(frozen=True)
class Scene:
    floor_polygon: np.ndarray  # (N,2)
    obstacles: tuple[Obstacle, ...] = ()
    class_table: dict[int, str] = field(default_factory=dict)
    wall_height: float = 2.5
    wall_class: int = 1
    floor_class: int = 0

    def __post_init__(self):
        poly = np.asarray(self.floor_polygon, dtype=np.float64).reshape(-1, 2)
        if poly.shape[0] < 3:
            raise ValueError("floor polygon needs >= 3 vertices")
        if _self_intersects(poly):
            raise ValueError("floor polygon is self-intersecting")
        object.__setattr__(self, "floor_polygon", poly)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    # -- geometry queries ---------------------------------------------------

    def contains(self, points) -> np.ndarray:
        return kernels.points_in_polygon(points, self.floor_polygon)

    def wall_table(self) -> tuple[np.ndarray, np.ndarray]:
        """All vertical surfaces as (M,6) x1,y1,x2,y2,z_lo,z_hi rows plus
        a parallel (M,) class-id array. Walls come first."""
        rows, classes = [], []
        for seg in _polygon_segments(self.floor_polygon):
            rows.append([*seg, 0.0, self.wall_height])
            classes.append(self.wall_class)
        for ob in self.obstacles:
            for seg in _polygon_segments(ob.footprint):
                rows.append([*seg, ob.z_min, ob.z_max])
                classes.append(ob.class_id)
        return np.array(rows, dtype=np.float64).reshape(-1, 6), np.array(classes, dtype=np.int64)

    def raycast(self, origin, dirs) -> tuple[np.ndarray, np.ndarray]:
        """Cast 3D rays from ``origin``; returns (t, class_id) per ray with
        t = inf / class -1 on miss. Hits vertical surfaces and the floor."""
        walls, classes = self.wall_table()
        t, idx = kernels.ray_wall_hits(origin, dirs, walls)
        cls = np.where(idx >= 0, classes[np.clip(idx, 0, None)], -1)
        # floor plane z = 0, restricted to the floor polygon
        dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
        dz = dirs[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_floor = np.where(np.abs(dz) > 1e-12, -origin[2] / dz, np.inf)
        candidates = (t_floor > 1e-12) & (t_floor < t)
        if np.any(candidates):
            pts = np.asarray(origin)[:2] + t_floor[candidates, None] * dirs[candidates, :2]
            inside = kernels.points_in_polygon(pts, self.floor_polygon)
            sel = np.flatnonzero(candidates)[inside]
            t[sel] = t_floor[sel]
            cls[sel] = self.floor_class
        return t, cls

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "floor_polygon": self.floor_polygon.tolist(),
            "obstacles": [
                {
                    "footprint": ob.footprint.tolist(),
                    "z_min": ob.z_min,
                    "z_max": ob.z_max,
                    "class": ob.class_id,
                }
                for ob in self.obstacles
            ],
            "class_table": {str(k): v for k, v in self.class_table.items()},
            "wall_height": self.wall_height,
            "wall_class": self.wall_class,
            "floor_class": self.floor_class,
        }

    @staticmethod
    def from_dict(d: dict) -> "Scene":
        return Scene(
            floor_polygon=np.array(d["floor_polygon"], dtype=np.float64),
            obstacles=tuple(
                Obstacle(
                    footprint=np.array(o["footprint"], dtype=np.float64),
                    z_min=float(o["z_min"]),
                    z_max=float(o["z_max"]),
                    class_id=int(o["class"]),
                )
                for o in d.get("obstacles", [])
            ),
            class_table={int(k): v for k, v in d.get("class_table", {}).items()},
            wall_height=float(d.get("wall_height", 2.5)),
            wall_class=int(d.get("wall_class", 1)),
            floor_class=int(d.get("floor_class", 0)),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f)

    @staticmethod
    def load(path) -> "Scene":
        with open(path, encoding="utf-8") as f:
            return Scene.from_dict(json.load(f))


def slice_scene(scene: Scene, height: float) -> np.ndarray:
    """Boundary segments (M,4) of the scene cut at a given height: the
    floor-polygon walls plus footprints of obstacles spanning the height."""
    segs = list(_polygon_segments(scene.floor_polygon))
    for ob in scene.obstacles:
        if ob.z_min <= height <= ob.z_max:
            segs.extend(_polygon_segments(ob.footprint))
    return np.array(segs, dtype=np.float64).reshape(-1, 4)


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _polygon_segments(poly: np.ndarray):
    for i in range(poly.shape[0]):
        a = poly[i]
        b = poly[(i + 1) % poly.shape[0]]
        yield (a[0], a[1], b[0], b[1])


def _self_intersects(poly: np.ndarray) -> bool:
    segs = list(_polygon_segments(poly))
    n = len(segs)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # closing edge shares a vertex with the first
            if _segments_cross(segs[i], segs[j]):
                return True
    return False


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _segments_cross(s1, s2) -> bool:
    p = np.array(s1[:2])
    r = np.array(s1[2:]) - p
    q = np.array(s2[:2])
    s = np.array(s2[2:]) - q
    denom = _cross2(r, s)
    if abs(denom) < 1e-12:
        return False
    t = _cross2(q - p, s) / denom
    u = _cross2(q - p, r) / denom
    return 1e-9 < t < 1 - 1e-9 and 1e-9 < u < 1 - 1e-9
