"""floorloc: register local 3D reconstructions to 2D LiDAR floor maps by
emulating sensor-height scans, with ambiguity-gated scene completion."""

from .geometry import (
    CameraModel,
    Plane,
    PointCloud2,
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
from .lidar import (
    NoiseModel,
    OccupancyGrid2,
    VirtualSensor,
    coverage_metric,
    raycast_hits,
    simulate_lidar,
)
from .register import (
    IcpSettings,
    OptimizerSettings,
    PoseCandidate,
    Raster,
    RegistrationResult,
    chamfer_1d,
    icp_register,
    ncc_init,
    optimize_poses,
    rasterize,
)
from .completion import (
    Completer,
    CompletionContext,
    DecisionParams,
    FileCompleter,
    NullCompleter,
    OracleCompleter,
    SceneSets,
    VirtualTrajectory,
    complete_scene,
    compute_scene_sets,
    plan_viewpoints,
    render_partial_view,
    should_complete,
)
from .scene import Obstacle, Scene, slice_scene
from .semantics import (
    ClassDistribution,
    LabeledCloud,
    SemanticObservation,
    fuse_labels,
    visible_frames,
)

__version__ = "0.1.0"
