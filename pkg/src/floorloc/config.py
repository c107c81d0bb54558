"""Experiment configuration: one TOML file fully enumerating every knob,
so runs are archival. Unknown keys are rejected."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields

from .errors import InvalidConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

STRATEGIES = ("base", "viola", "viola_all", "viola_gt")
VIEWPOINT_STRATEGIES = ("viola", "step_back_0.5", "rvc_height")
COMPLETERS = ("oracle", "null", "file")


@dataclass
class SensorConfig:
    rvc_height: float = 0.10
    slab: float = 0.10
    raycast_resolution: float = 0.025
    raycast_num_rays: int = 240
    camera_hfov_deg: float = 70.0
    camera_vfov_deg: float = 50.0
    camera_max_range: float = 8.0


@dataclass
class LidarConfig:
    sensor_grid: float = 0.5
    num_rays: int = 720
    max_range: float = 30.0
    noise_sigma: float = 0.01
    drop_prob: float = 0.1
    noise_seed: int = 0


@dataclass
class RegistrationConfig:
    resolution: float = 0.05
    blur_sigma: float = 1.5
    k: int = 100
    angle_step_deg: float = 3.0
    max_iters: int = 200
    tol: float = 1e-6
    initial_step: float = 0.1
    shrink: float = 0.5
    armijo: float = 1e-4
    workers: int = 1


@dataclass
class DecisionConfig:
    theta_r_deg: float = 20.0
    theta_t: float = 0.3
    c_mm: float = 20.0


@dataclass
class CompletionConfig:
    vicinity: float = 0.15
    frontier_len: float = 2.0
    frontier_spacing: float = 0.1
    cluster_threshold: float = 0.15
    back_step: float = 0.2
    rot_step_deg: float = 10.0
    max_rotation_deg: float = 30.0
    completer: str = "oracle"
    completer_dir: str = ""
    oracle_depth_noise: float = 0.0
    render_width: int = 128
    render_height: int = 96
    pixel_stride: int = 2
    coverage_radius: float = 0.1


@dataclass
class DatasetConfig:
    num_trials: int = 20
    seed: int = 0
    lidar_noise: bool = True
    low_coverage_fraction: float = 0.0
    min_extent: float = 5.0
    max_extent: float = 9.0
    furniture_min: int = 2
    furniture_max: int = 5
    with_semantics: bool = False


@dataclass
class StrategyConfig:
    strategy: str = "viola"
    viewpoint_strategy: str = "viola"


@dataclass
class ExperimentConfig:
    sensor: SensorConfig = field(default_factory=SensorConfig)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    registration: RegistrationConfig = field(default_factory=RegistrationConfig)
    decision: DecisionConfig = field(default_factory=DecisionConfig)
    completion: CompletionConfig = field(default_factory=CompletionConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)

    def validate(self) -> "ExperimentConfig":
        if self.strategy.strategy not in STRATEGIES:
            raise InvalidConfig(f"unknown strategy {self.strategy.strategy!r}")
        if self.strategy.viewpoint_strategy not in VIEWPOINT_STRATEGIES:
            raise InvalidConfig(
                f"unknown viewpoint_strategy {self.strategy.viewpoint_strategy!r}"
            )
        if self.completion.completer not in COMPLETERS:
            raise InvalidConfig(f"unknown completer {self.completion.completer!r}")
        if self.completion.completer == "file" and not self.completion.completer_dir:
            raise InvalidConfig("completer 'file' requires completer_dir")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {f.name: f.default_factory for f in fields(ExperimentConfig)}


def config_from_dict(data: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for section, values in data.items():
        if section not in _SECTIONS:
            raise InvalidConfig(f"unknown config section {section!r}")
        target = getattr(cfg, section)
        known = {f.name: f.type for f in fields(target)}
        if not isinstance(values, dict):
            raise InvalidConfig(f"section {section!r} must be a table")
        for key, val in values.items():
            if key not in known:
                raise InvalidConfig(f"unknown key {section}.{key}")
            current = getattr(target, key)
            if isinstance(current, bool):
                if not isinstance(val, bool):
                    raise InvalidConfig(f"{section}.{key} must be a boolean")
            elif isinstance(current, int) and isinstance(val, bool):
                raise InvalidConfig(f"{section}.{key} must be a number")
            elif isinstance(current, float) and isinstance(val, int):
                val = float(val)
            elif not isinstance(val, type(current)):
                raise InvalidConfig(
                    f"{section}.{key} must be {type(current).__name__}"
                )
            setattr(target, key, val)
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidConfig(f"bad TOML: {exc}") from exc
    return config_from_dict(data)


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply ``section.key=value`` command-line overrides."""
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise InvalidConfig(f"override must look like section.key=value: {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in _SECTIONS:
            raise InvalidConfig(f"unknown config section {section!r}")
        target = getattr(cfg, section)
        if not hasattr(target, key):
            raise InvalidConfig(f"unknown key {section}.{key}")
        current = getattr(target, key)
        try:
            if isinstance(current, bool):
                val = raw.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                val = int(raw)
            elif isinstance(current, float):
                val = float(raw)
            else:
                val = raw
        except ValueError as exc:
            raise InvalidConfig(f"bad value for {dotted}: {raw!r}") from exc
        setattr(target, key, val)
    return cfg.validate()


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    return '"' + str(v).replace("\\", "\\\\").replace('"', '\\"') + '"'


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section, values in cfg.to_dict().items():
        lines.append(f"[{section}]")
        for key, val in values.items():
            lines.append(f"{key} = {_toml_value(val)}")
        lines.append("")
    return "\n".join(lines)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_config(cfg))
