"""Command-line surface.

Verbs: simulate (scene -> LiDAR scan), register (hits + map -> pose),
complete (run the completion pass of one generated trial), trial,
benchmark, report (re-emit from CSV), search (decision-parameter grid).

Exit codes: 0 success, 2 invalid config, 3 dataset error, 4 internal.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import replace

import numpy as np

from .config import (
    ExperimentConfig,
    apply_overrides,
    dump_config,
    load_config,
    save_config,
)
from .datagen import generate_trial, trial_fractions
from .errors import InvalidConfig, InvalidSpec
from .lidar import load_scan, save_scan
from .pipeline import compute_aggregates, run_benchmark, run_trial
from .report import emit_report, read_csv
from .scene import Scene


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="experiment config (TOML)")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config value",
    )


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return apply_overrides(cfg, args.overrides)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="floorloc")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a 2D LiDAR scan of a scene file")
    _add_common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-noise", action="store_true")

    p = sub.add_parser("register", help="register a hit-point scan to a LiDAR map")
    _add_common(p)
    p.add_argument("--hits", required=True)
    p.add_argument("--map", required=True, dest="map_file")
    p.add_argument("--out")

    p = sub.add_parser("complete", help="run scene completion for one generated trial")
    _add_common(p)
    p.add_argument("--trial-index", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSON for the completed cloud")

    p = sub.add_parser("trial", help="run one generated trial end to end")
    _add_common(p)
    p.add_argument("--trial-index", type=int, default=0)

    p = sub.add_parser("benchmark", help="run the configured benchmark")
    _add_common(p)
    p.add_argument("--strategies", help="comma-separated list, default from config")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", help="re-emit report files from a per-trial CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("search", help="grid search over decision parameters")
    _add_common(p)
    p.add_argument("--c-values", default="10,20,30,40")
    p.add_argument("--theta-r-values", default="20,30")
    p.add_argument("--theta-t-values", default="0.2,0.3")
    p.add_argument("--out")

    p = sub.add_parser("config", help="print the fully resolved config")
    _add_common(p)
    p.add_argument("--out")
    return ap


def _cmd_simulate(args, cfg):
    from .datagen import simulate_map

    scene = Scene.load(args.scene)
    pc = simulate_map(scene, cfg.sensor, cfg.lidar, noisy=not args.no_noise)
    save_scan(pc, args.out)
    print(f"wrote {len(pc)} points to {args.out}")


def _cmd_register(args, cfg):
    from .pipeline import _register

    H = load_scan(args.hits)
    P = load_scan(args.map_file)
    result = _register(H, P, cfg)
    best = result.best
    out = {
        "theta": best.pose.theta,
        "t": best.pose.t.tolist(),
        "loss": best.loss,
        "candidates": len(result.candidates),
        "wall_time": result.wall_time,
    }
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    print(text)


def _bundle_for(args, cfg):
    fracs = trial_fractions(cfg.dataset)
    idx = args.trial_index
    if not 0 <= idx < cfg.dataset.num_trials:
        raise InvalidSpec(f"trial index {idx} outside dataset of {cfg.dataset.num_trials}")
    return generate_trial(idx, cfg.dataset, cfg.sensor, cfg.lidar, low_coverage_fraction=fracs[idx])


def _cmd_complete(args, cfg):
    from .completion import compute_scene_sets, complete_scene, plan_viewpoints  # noqa: F401
    from .pipeline import _completion_pass, _emulate_hits, _register
    from .geometry import downproject_cameras, fit_floor_plane

    bundle = _bundle_for(args, cfg)
    floor = fit_floor_plane(bundle.cloud, floor_class=0, seed=bundle.trial_seed % (2**31))
    cams2 = [p for p, ok in downproject_cameras(list(bundle.cams), floor, cfg.sensor.rvc_height) if ok]
    H = _emulate_hits(bundle.cloud, floor, cams2, cfg)
    base = _register(H, bundle.lidar_map, cfg)
    result = _completion_pass(bundle, cfg, floor, cams2, H, bundle.lidar_map, base)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(
            {
                "pose": {"theta": result.best.pose.theta, "t": result.best.pose.t.tolist()},
                "loss": result.best.loss,
            },
            f,
            indent=2,
        )
    print(f"completed trial {args.trial_index}; wrote {args.out}")


def _cmd_trial(args, cfg):
    bundle = _bundle_for(args, cfg)
    rec = run_trial(bundle, cfg)
    print(json.dumps(rec.__dict__, indent=2, default=float))


def _cmd_benchmark(args, cfg):
    strategies = args.strategies.split(",") if args.strategies else None
    report = run_benchmark(cfg, strategies=strategies)
    paths = emit_report(report, args.out)
    print(json.dumps(report.aggregates, indent=2))
    print(f"wrote {paths['csv']}, {paths['json']}, {paths['svg']}")


def _cmd_report(args):
    report = read_csv(args.csv)
    paths = emit_report(report, args.out)
    print(f"wrote {paths['csv']}, {paths['json']}, {paths['svg']}")


def _cmd_search(args, cfg):
    from .datagen import generate_dataset

    c_vals = [float(x) for x in args.c_values.split(",")]
    tr_vals = [float(x) for x in args.theta_r_values.split(",")]
    tt_vals = [float(x) for x in args.theta_t_values.split(",")]
    bundles = list(generate_dataset(cfg.dataset, cfg.sensor, cfg.lidar))
    rows = []
    for c, tr, tt in itertools.product(c_vals, tr_vals, tt_vals):
        cfg_i = replace(
            cfg,
            decision=replace(cfg.decision, c_mm=c, theta_r_deg=tr, theta_t=tt),
            strategy=replace(cfg.strategy, strategy="viola"),
        )
        records = [run_trial(b, cfg_i) for b in bundles]
        agg = compute_aggregates(records)["viola"]
        rows.append({"c": c, "theta_R": tr, "theta_T": tt, **agg})
        print(
            f"c={c:g} theta_R={tr:g} theta_T={tt:g} -> "
            f"R_mean={agg['R_mean']:.3f} SR={agg['SR']:.3f}"
        )
    best = min(rows, key=lambda r: (r["R_mean"] if np.isfinite(r["R_mean"]) else np.inf))
    print("best: " + json.dumps(best))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=2)


def _cmd_config(args, cfg):
    if args.out:
        save_config(cfg, args.out)
        print(f"wrote {args.out}")
    else:
        print(dump_config(cfg))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            _cmd_report(args)
            return 0
        cfg = _load_cfg(args)
        if args.command == "simulate":
            _cmd_simulate(args, cfg)
        elif args.command == "register":
            _cmd_register(args, cfg)
        elif args.command == "complete":
            _cmd_complete(args, cfg)
        elif args.command == "trial":
            _cmd_trial(args, cfg)
        elif args.command == "benchmark":
            _cmd_benchmark(args, cfg)
        elif args.command == "search":
            _cmd_search(args, cfg)
        elif args.command == "config":
            _cmd_config(args, cfg)
        return 0
    except InvalidConfig as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except (InvalidSpec, FileNotFoundError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
