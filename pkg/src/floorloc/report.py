"""Report emission: per-trial CSV, aggregate JSON, and an SVG scatter of
coverage against rotation / translation error with the success bounds."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import IoError
from .pipeline import SUCCESS_ROT_DEG, SUCCESS_TRANS_M, Report, TrialRecord, compute_aggregates

CSV_FIELDS = [
    "scene_id",
    "trial_seed",
    "strategy",
    "coverage",
    "rot_err",
    "trans_err",
    "success",
    "completion_activated",
    "wall_time",
    "error",
]


def emit_report(report: Report, out_dir: str, basename: str = "report") -> dict:
    """Write <basename>.csv, <basename>.json and <basename>.svg; returns
    the paths. Raises IoError on an empty report or unwritable output."""
    if not report.records:
        raise IoError("refusing to emit an empty report")
    try:
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "csv": os.path.join(out_dir, f"{basename}.csv"),
            "json": os.path.join(out_dir, f"{basename}.json"),
            "svg": os.path.join(out_dir, f"{basename}.svg"),
        }
        write_csv(report.records, paths["csv"])
        with open(paths["json"], "w", encoding="utf-8") as f:
            json.dump(report.aggregates, f, indent=2)
        with open(paths["svg"], "w", encoding="utf-8") as f:
            f.write(scatter_svg(report.records))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return paths


def write_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in records:
            w.writerow(
                {
                    "scene_id": r.scene_id,
                    "trial_seed": r.trial_seed,
                    "strategy": r.strategy,
                    "coverage": repr(float(r.coverage)),
                    "rot_err": repr(float(r.rot_err)),
                    "trans_err": repr(float(r.trans_err)),
                    "success": int(r.success),
                    "completion_activated": int(r.completion_activated),
                    "wall_time": repr(float(r.wall_time)),
                    "error": r.error,
                }
            )


def read_csv(path) -> Report:
    records = []
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            records.append(
                TrialRecord(
                    scene_id=int(row["scene_id"]),
                    trial_seed=int(row["trial_seed"]),
                    strategy=row["strategy"],
                    coverage=float(row["coverage"]),
                    rot_err=float(row["rot_err"]),
                    trans_err=float(row["trans_err"]),
                    success=bool(int(row["success"])),
                    completion_activated=bool(int(row["completion_activated"])),
                    wall_time=float(row["wall_time"]),
                    error=row["error"],
                )
            )
    return Report(tuple(records), compute_aggregates(records))


def scatter_svg(records, width: int = 900, height: int = 420) -> str:
    """Two panels, coverage vs rotation error and coverage vs translation
    error, each with its success-bound reference line."""
    half = width // 2
    pad = 50
    rot_cap = 180.0
    trans_cap = 5.0

    def panel(x0, values, cap, bound, label, ref_id):
        parts = []
        pw, ph = half - 2 * pad, height - 2 * pad
        parts.append(
            f'<rect x="{x0 + pad}" y="{pad}" width="{pw}" height="{ph}" '
            'fill="none" stroke="#999"/>'
        )
        by = pad + ph - (min(bound, cap) / cap) * ph
        parts.append(
            f'<line id="{ref_id}" class="reference-line" x1="{x0 + pad}" y1="{by:.1f}" '
            f'x2="{x0 + pad + pw}" y2="{by:.1f}" stroke="#d33" stroke-dasharray="4 3"/>'
        )
        for cov, val in values:
            if not (np.isfinite(cov) and np.isfinite(val)):
                continue
            cx = x0 + pad + cov * pw
            cy = pad + ph - (min(val, cap) / cap) * ph
            parts.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="3" fill="#36c" fill-opacity="0.6"/>')
        parts.append(
            f'<text x="{x0 + pad + pw / 2:.0f}" y="{height - 12}" text-anchor="middle" '
            f'font-size="13">{label}</text>'
        )
        return parts

    body = []
    body += panel(
        0,
        [(r.coverage, r.rot_err) for r in records],
        rot_cap,
        SUCCESS_ROT_DEG,
        "coverage vs rotation error (deg)",
        "rot-bound",
    )
    body += panel(
        half,
        [(r.coverage, r.trans_err) for r in records],
        trans_cap,
        SUCCESS_TRANS_M,
        "coverage vs translation error (m)",
        "trans-bound",
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
        + "".join(body)
        + "</svg>"
    )
