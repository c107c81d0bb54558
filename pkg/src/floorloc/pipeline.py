"""End-to-end trial orchestration: floor fit, downprojection, hit-point
emulation, registration, completion gating, re-registration and metrics."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .completion import (
    Completer,
    DecisionParams,
    FileCompleter,
    NullCompleter,
    OracleCompleter,
    VirtualTrajectory,
    complete_scene,
    compute_scene_sets,
    plan_viewpoints,
    should_complete,
)
from .config import ExperimentConfig
from .datagen import TrialBundle, camera_model, generate_dataset
from .errors import FloorlocError
from .geometry import (
    Plane,
    PointCloud2,
    PointCloud3,
    Pose2,
    Pose3,
    downproject_cameras,
    fit_floor_plane,
    pose_error,
    to_floor_frame,
)
from .lidar import OccupancyGrid2, coverage_metric, raycast_hits
from .register import (
    OptimizerSettings,
    RegistrationResult,
    ncc_init,
    optimize_poses,
)

SUCCESS_ROT_DEG = 10.0
SUCCESS_TRANS_M = 0.3


@dataclass(frozen=True)
class TrialRecord:
    scene_id: int
    trial_seed: int
    strategy: str
    coverage: float
    rot_err: float
    trans_err: float
    success: bool
    completion_activated: bool
    wall_time: float
    error: str = ""


@dataclass(frozen=True)
class Report:
    records: tuple[TrialRecord, ...]
    aggregates: dict


def _optimizer_settings(cfg: ExperimentConfig) -> OptimizerSettings:
    r = cfg.registration
    return OptimizerSettings(
        max_iters=r.max_iters,
        tol=r.tol,
        initial_step=r.initial_step,
        shrink=r.shrink,
        armijo=r.armijo,
        workers=r.workers,
    )


def _decision_params(cfg: ExperimentConfig) -> DecisionParams:
    d = cfg.decision
    return DecisionParams(theta_R=d.theta_r_deg, theta_T=d.theta_t, c=d.c_mm)


def make_completer(cfg: ExperimentConfig, bundle: TrialBundle) -> Completer:
    c = cfg.completion
    if c.completer == "null":
        return NullCompleter()
    if c.completer == "file":
        return FileCompleter(c.completer_dir)
    return OracleCompleter(
        bundle.scene, bundle.gt, depth_noise=c.oracle_depth_noise, seed=bundle.trial_seed
    )


def _register(H: PointCloud2, P: PointCloud2, cfg: ExperimentConfig) -> RegistrationResult:
    r = cfg.registration
    inits = ncc_init(
        H,
        P,
        k=r.k,
        angle_step=r.angle_step_deg,
        resolution=r.resolution,
        blur_sigma=r.blur_sigma,
        nms_rot=cfg.decision.theta_r_deg / 2.0,
        nms_trans=cfg.decision.theta_t / 2.0,
    )
    return optimize_poses(H, P, inits, _optimizer_settings(cfg))


def _emulate_hits(cloud: PointCloud3, floor: Plane, cams2, cfg: ExperimentConfig) -> PointCloud2:
    s = cfg.sensor
    cam = camera_model(s)
    return raycast_hits(
        cloud,
        floor,
        s.rvc_height,
        cams2,
        hfov=cam.hfov,
        num_rays=s.raycast_num_rays,
        max_range=cam.max_range,
        slab=s.slab,
        resolution=s.raycast_resolution,
    )


def _alternate_trajectory(strategy: str, cams, cams2_valid, rvc_height: float, max_views: int = 10):
    """Baseline viewpoint strategies: step every camera back 0.5 m, or
    drop viewpoints to the sensor height facing their downprojected yaw."""
    stride = max(1, len(cams) // max_views)
    if strategy == "step_back_0.5":
        views = [
            Pose3(c.rotation, c.t - 0.5 * c.optical_axis) for c in cams[::stride][:max_views]
        ]
    else:  # rvc_height
        views = []
        for pose2 in cams2_valid[::stride][:max_views]:
            c, s = np.cos(pose2.theta), np.sin(pose2.theta)
            z_axis = np.array([c, s, 0.0])
            x_axis = np.array([s, -c, 0.0])
            y_axis = np.cross(z_axis, x_axis)
            r = np.stack([x_axis, y_axis, z_axis], axis=1)
            views.append(Pose3(r, np.array([pose2.t[0], pose2.t[1], rvc_height])))
    return VirtualTrajectory(tuple(views), source_frame=0)


def run_trial(bundle: TrialBundle, cfg: ExperimentConfig) -> TrialRecord:
    strategy = cfg.strategy.strategy
    t0 = time.perf_counter()
    try:
        return _run_trial_inner(bundle, cfg, strategy, t0)
    except FloorlocError as exc:
        return TrialRecord(
            scene_id=bundle.scene_id,
            trial_seed=bundle.trial_seed,
            strategy=strategy,
            coverage=float("nan"),
            rot_err=float("nan"),
            trans_err=float("nan"),
            success=False,
            completion_activated=False,
            wall_time=time.perf_counter() - t0,
            error=f"{type(exc).__name__}: {exc}",
        )


def _run_trial_inner(bundle: TrialBundle, cfg: ExperimentConfig, strategy: str, t0: float) -> TrialRecord:
    s = cfg.sensor
    floor = fit_floor_plane(bundle.cloud, floor_class=0, seed=bundle.trial_seed % (2**31))
    projected = downproject_cameras(list(bundle.cams), floor, s.rvc_height)
    cams2 = [p for p, valid in projected if valid]
    H = _emulate_hits(bundle.cloud, floor, cams2, cfg)
    P = bundle.lidar_map
    coverage = coverage_metric(H, P, bundle.gt, cfg.completion.coverage_radius)
    result = _register(H, P, cfg)

    activate = False
    if strategy == "viola_all":
        activate = True
    elif strategy == "viola":
        activate, _ = should_complete(result, _decision_params(cfg))
    elif strategy == "viola_gt":
        rot, trans = pose_error(result.best.pose, bundle.gt)
        activate = rot >= SUCCESS_ROT_DEG or trans >= SUCCESS_TRANS_M

    completion_ran = False
    if activate:
        try:
            result = _completion_pass(bundle, cfg, floor, cams2, H, P, result)
            completion_ran = True
        except FloorlocError:
            pass  # completion could not run; keep the uncompleted estimate

    rot, trans = pose_error(result.best.pose, bundle.gt)
    return TrialRecord(
        scene_id=bundle.scene_id,
        trial_seed=bundle.trial_seed,
        strategy=strategy,
        coverage=coverage,
        rot_err=rot,
        trans_err=trans,
        success=rot < SUCCESS_ROT_DEG and trans < SUCCESS_TRANS_M,
        completion_activated=completion_ran,
        wall_time=time.perf_counter() - t0,
    )


def _completion_pass(bundle, cfg, floor, cams2, H, P, base_result) -> RegistrationResult:
    s = cfg.sensor
    c = cfg.completion
    cam_model = camera_model(s)
    sets = compute_scene_sets(
        bundle.cloud,
        H,
        floor,
        s.rvc_height,
        vicinity=c.vicinity,
        frontier_len=c.frontier_len,
        frontier_spacing=c.frontier_spacing,
        cluster_threshold=c.cluster_threshold,
    )
    pts_floor = to_floor_frame(bundle.cloud.points, floor)
    in_slab = np.abs(pts_floor[:, 2] - s.rvc_height) <= s.slab / 2.0
    occ = OccupancyGrid2.from_points(pts_floor[in_slab, :2], s.raycast_resolution)

    vp = cfg.strategy.viewpoint_strategy
    if vp == "viola":
        trajectory = plan_viewpoints(
            sets,
            list(bundle.cams),
            cam_model,
            occ,
            back_step=c.back_step,
            rot_step=np.radians(c.rot_step_deg),
            max_rotation=np.radians(c.max_rotation_deg),
        )
    else:
        trajectory = _alternate_trajectory(vp, list(bundle.cams), cams2, s.rvc_height)

    completer = make_completer(cfg, bundle)
    completed = complete_scene(
        bundle.cloud,
        trajectory,
        completer,
        cam_model,
        width=c.render_width,
        height=c.render_height,
        pixel_stride=c.pixel_stride,
    )
    H2 = _emulate_hits(completed, floor, cams2, cfg)
    return _register(H2, P, cfg)


# ---------------------------------------------------------------------------
# benchmark


def compute_aggregates(records) -> dict:
    out = {}
    by_strategy: dict[str, list[TrialRecord]] = {}
    for r in records:
        by_strategy.setdefault(r.strategy, []).append(r)
    for strat, rows in by_strategy.items():
        rot = np.array([r.rot_err for r in rows])
        trans = np.array([r.trans_err for r in rows])
        ok = np.isfinite(rot)
        out[strat] = {
            "trials": len(rows),
            "R_mean": float(np.mean(rot[ok])) if ok.any() else float("nan"),
            "R_median": float(np.median(rot[ok])) if ok.any() else float("nan"),
            "T_mean": float(np.mean(trans[ok])) if ok.any() else float("nan"),
            "T_median": float(np.median(trans[ok])) if ok.any() else float("nan"),
            "SR": float(np.mean([r.success for r in rows])),
        }
    return out


def run_benchmark(
    cfg: ExperimentConfig,
    strategies: list[str] | None = None,
    bundles=None,
    progress=None,
) -> Report:
    """Run every trial under each strategy and aggregate. Each bundle is
    generated once and shared across strategies, so strategy columns are
    directly comparable."""
    if strategies is None:
        strategies = [cfg.strategy.strategy]
    if not strategies:
        raise ValueError("no strategies to run")
    if bundles is None:
        bundles = generate_dataset(cfg.dataset, cfg.sensor, cfg.lidar)
    records: list[TrialRecord] = []
    for bundle in bundles:
        for strat in strategies:
            cfg_s = replace(cfg, strategy=replace(cfg.strategy, strategy=strat))
            records.append(run_trial(bundle, cfg_s))
        if progress is not None:
            progress(bundle.scene_id)
    records.sort(key=lambda r: (r.scene_id, r.strategy))
    return Report(tuple(records), compute_aggregates(records))
