"""Benchmark the compiled kernels against the pure-numpy fallback.

The package selects its kernel implementations at import time from the
FLOORLOC_PURE_NUMPY environment variable, so each backend runs in its own
subprocess. Usage:

    python3 benchmarks/bench_kernels.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKLOAD = textwrap.dedent(
    """
    import json, time
    import numpy as np
    from floorloc import kernels

    rng = np.random.default_rng(0)

    # ray-segment casting: 2000 rays against 400 wall segments
    segs = rng.uniform(-5, 5, (400, 4))
    angles = np.linspace(0, 2 * np.pi, 2000, endpoint=False)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    origin = np.zeros(2)

    # grid traversal: 2000 rays over a 400x400 occupancy grid
    occ = rng.random((400, 400)) < 0.02
    start = np.array([200.0, 200.0])

    # point-in-polygon: 200k points against a 64-gon
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    poly = np.stack([4 * np.cos(t), 4 * np.sin(t)], axis=1)
    pts = rng.uniform(-5, 5, (200_000, 2))

    # 3D wall raycast: 5000 rays against 200 walls
    walls = np.column_stack(
        [rng.uniform(-5, 5, (200, 4)), np.zeros(200), np.full(200, 2.5)]
    )
    d3 = rng.normal(size=(5000, 3))
    d3 /= np.linalg.norm(d3, axis=1, keepdims=True)
    o3 = np.array([0.0, 0.0, 1.0])

    cases = {
        "ray_segment_distances": lambda: kernels.ray_segment_distances(
            origin, dirs, segs, 30.0
        ),
        "grid_first_hits": lambda: kernels.grid_first_hits(occ, start, dirs, 600.0),
        "points_in_polygon": lambda: kernels.points_in_polygon(pts, poly),
        "ray_wall_hits": lambda: kernels.ray_wall_hits(o3, d3, walls),
    }

    repeats = int(REPEATS)
    out = {"backend": "numba" if kernels.USE_NUMBA else "numpy", "times": {}}
    for name, fn in cases.items():
        fn()  # warm-up (and JIT compile on the numba backend)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        out["times"][name] = min(times)
    print(json.dumps(out))
    """
)


def run_backend(pure_numpy: bool, repeats: int) -> dict:
    env = dict(os.environ, FLOORLOC_PURE_NUMPY="1" if pure_numpy else "0")
    code = WORKLOAD.replace("REPEATS", str(repeats))
    proc = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    numba_res = run_backend(pure_numpy=False, repeats=args.repeats)
    numpy_res = run_backend(pure_numpy=True, repeats=args.repeats)

    print(f"{'kernel':<26}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>10}")
    for name in numba_res["times"]:
        tb = numba_res["times"][name] * 1e3
        tn = numpy_res["times"][name] * 1e3
        print(f"{name:<26}{tb:>12.3f}{tn:>12.3f}{tn / tb:>9.1f}x")


if __name__ == "__main__":
    main()
