"""Mission configuration: JSON sections with defaults; unknown keys are rejected.

Schema (every key optional, angles in degrees)::

    resolution        voxel edge length r_V (m)               0.2
    time_limit        autonomous time budget T_e(0) (s)        600
    dt                simulation tick (s)                      0.1
    seed              RNG seed (the CLI --seed overrides)      0
    robot             class, v_ref, yaw_rate_max, reverse_distance,
                      half_extents, localization_sigma, recovery_attempts
    mapping_sensor    max_range, fov_h_deg, fov_v_deg, step_deg, offset, noise_sigma
    gain_sensor       max_range, fov_h_deg, fov_v_deg, step_deg, offset
    cameras           list of {fov_h_deg, fov_v_deg, max_range, yaw_deg, offset}
    planner           bound, n_samples, edge_radius, zeta, delta_gain, gain_threshold,
                      frontier_radius, dtw_threshold, eps_d, safety_margin, mode,
                      vertical_bonus, floor_height, direction_history,
                      refine_clearance, refine_iterations
    artifacts         radius, grid, p_hit, p_miss, threshold, object_size,
                      false_negative_rate, box_jitter, proximity_range,
                      range_only_radius,
                      detect_every, max_range
    log               chunk_seconds
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .artifacts import ArtifactParams, Camera, DetectorParams
from .global_planner import TimeBudget
from .local_planner import GainParams, LocalParams
from .sensor import SensorFrustum
from .world import RobotModel


class ConfigError(ValueError):
    pass


@dataclass
class RobotSection:
    cls: str = "aerial"
    v_ref: float = 1.0
    yaw_rate_max: float = 1.0
    reverse_distance: float = 0.5
    half_extents: tuple[float, float, float] = (0.3, 0.3, 0.3)
    localization_sigma: float = 0.0
    recovery_attempts: int = 3


@dataclass
class SensorSection:
    max_range: float = 5.0
    fov_h_deg: float = 360.0
    fov_v_deg: float = 30.0
    step_deg: float = 2.0
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    noise_sigma: float = 0.0

    def frustum(self) -> SensorFrustum:
        return SensorFrustum(self.max_range, math.radians(self.fov_h_deg),
                             math.radians(self.fov_v_deg), math.radians(self.step_deg),
                             tuple(self.offset))


@dataclass
class CameraSection:
    fov_h_deg: float = 90.0
    fov_v_deg: float = 60.0
    max_range: float = 8.0
    yaw_deg: float = 0.0
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def camera(self) -> Camera:
        return Camera(math.radians(self.fov_h_deg), math.radians(self.fov_v_deg),
                      self.max_range, math.radians(self.yaw_deg), tuple(self.offset))


@dataclass
class PlannerSection:
    bound: tuple[float, float, float] = (20.0, 20.0, 3.0)
    n_samples: int = 300
    edge_radius: float = 1.0
    zeta: float = 0.3
    delta_gain: float = 0.15
    gain_threshold: float = 30.0
    frontier_radius: float = 3.0
    dtw_threshold: float = 4.0
    eps_d: float = 0.02
    safety_margin: float = 30.0
    mode: str = "horizontal"
    vertical_bonus: float = 200.0
    floor_height: float = 2.5
    direction_history: int = 10
    refine_clearance: float | None = None
    refine_iterations: int = 10


@dataclass
class ArtifactSection:
    radius: float = 1.0
    grid: tuple[int, int] = (5, 5)
    p_hit: float = 0.7
    p_miss: float = 0.3
    threshold: float = 0.9
    object_size: float = 0.5
    false_negative_rate: float = 0.0
    box_jitter: float = 0.0
    proximity_range: float = 3.0
    range_only_radius: float = 3.0
    detect_every: int = 5
    max_range: float = 16.0


@dataclass
class LogSection:
    chunk_seconds: float = 300.0


def _default_mapping() -> SensorSection:
    return SensorSection(max_range=6.0, fov_v_deg=180.0, step_deg=2.0)


def _default_cameras() -> list[CameraSection]:
    return [CameraSection(yaw_deg=y) for y in (0.0, 90.0, 180.0, -90.0)]


@dataclass
class MissionConfig:
    resolution: float = 0.2
    time_limit: float = 600.0
    dt: float = 0.1
    seed: int = 0
    robot: RobotSection = field(default_factory=RobotSection)
    mapping_sensor: SensorSection = field(default_factory=_default_mapping)
    gain_sensor: SensorSection = field(default_factory=SensorSection)
    cameras: list[CameraSection] = field(default_factory=_default_cameras)
    planner: PlannerSection = field(default_factory=PlannerSection)
    artifacts: ArtifactSection = field(default_factory=ArtifactSection)
    log: LogSection = field(default_factory=LogSection)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        p = self.planner
        checks = [
            (self.resolution > 0, "resolution must be > 0"),
            (self.time_limit > 0, "time_limit must be > 0"),
            (0 < self.dt <= 1.0, "dt must lie in (0, 1]"),
            (self.seed >= 0, "seed must be >= 0"),
            (self.robot.cls in ("legged", "aerial"), "robot.class must be legged or aerial"),
            (self.robot.v_ref > 0, "robot.v_ref must be > 0"),
            (self.robot.yaw_rate_max > 0, "robot.yaw_rate_max must be > 0"),
            (self.robot.reverse_distance >= 0, "robot.reverse_distance must be >= 0"),
            (min(self.robot.half_extents) > 0, "robot.half_extents must be > 0"),
            (self.robot.localization_sigma >= 0, "robot.localization_sigma must be >= 0"),
            (min(p.bound) > 0, "planner.bound must be > 0"),
            (p.n_samples >= 1, "planner.n_samples must be >= 1"),
            (p.edge_radius > 0, "planner.edge_radius must be > 0"),
            (p.zeta >= 0 and p.delta_gain >= 0, "planner.zeta/delta_gain must be >= 0"),
            (p.gain_threshold > 0, "planner.gain_threshold must be > 0"),
            (p.frontier_radius >= 0, "planner.frontier_radius must be >= 0"),
            (p.dtw_threshold >= 0, "planner.dtw_threshold must be >= 0"),
            (p.eps_d >= 0 and p.safety_margin >= 0, "planner.eps_d/safety_margin must be >= 0"),
            (p.mode in ("horizontal", "vertical"), "planner.mode must be horizontal or vertical"),
            (p.direction_history >= 1, "planner.direction_history must be >= 1"),
            (p.refine_clearance is None or p.refine_clearance >= 0,
             "planner.refine_clearance must be >= 0"),
            (0 < self.artifacts.p_miss < self.artifacts.p_hit < 1,
             "artifacts need 0 < p_miss < p_hit < 1"),
            (0 < self.artifacts.threshold < 1, "artifacts.threshold must lie in (0, 1)"),
            (self.artifacts.radius > 0, "artifacts.radius must be > 0"),
            (self.artifacts.range_only_radius > 0, "artifacts.range_only_radius must be > 0"),
            (min(self.artifacts.grid) >= 1, "artifacts.grid must be >= 1"),
            (0 <= self.artifacts.false_negative_rate < 1,
             "artifacts.false_negative_rate must lie in [0, 1)"),
            (self.artifacts.detect_every >= 1, "artifacts.detect_every must be >= 1"),
            (self.log.chunk_seconds > 0, "log.chunk_seconds must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for s in (self.mapping_sensor, self.gain_sensor):
            try:
                s.frustum()
            except ValueError as e:
                raise ConfigError(str(e)) from None
        for c in self.cameras:
            try:
                c.camera()
            except ValueError as e:
                raise ConfigError(str(e)) from None

    # derived objects ---------------------------------------------------

    def robot_model(self) -> RobotModel:
        r = self.robot
        return RobotModel(r.cls, r.v_ref, r.yaw_rate_max, r.reverse_distance,
                          self.time_limit, tuple(r.half_extents), r.localization_sigma)

    def gain_params(self, direction=(0.0, 0.0, 0.0)) -> GainParams:
        p = self.planner
        return GainParams(p.zeta, p.delta_gain, tuple(direction), p.gain_threshold)

    def local_params(self) -> LocalParams:
        p = self.planner
        return LocalParams(tuple(p.bound), p.n_samples, p.edge_radius, p.mode,
                           p.vertical_bonus, p.floor_height, planar=self.robot.cls == "legged")

    def budget(self, remaining: float) -> TimeBudget:
        return TimeBudget(remaining, self.robot.v_ref, self.planner.eps_d,
                          self.planner.safety_margin)

    def artifact_params(self) -> ArtifactParams:
        a = self.artifacts
        return ArtifactParams(a.radius, tuple(a.grid), a.p_hit, a.p_miss, a.threshold,
                              a.range_only_radius)

    def detector_params(self) -> DetectorParams:
        a = self.artifacts
        return DetectorParams(a.object_size, a.false_negative_rate, a.box_jitter,
                              a.proximity_range)

    def refine_clearance(self) -> float:
        if self.planner.refine_clearance is not None:
            return self.planner.refine_clearance
        return 2 * max(self.robot.half_extents)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "cameras":
                out[f.name] = [_section_dict(c) for c in v]
            elif hasattr(v, "__dataclass_fields__"):
                out[f.name] = _section_dict(v)
            else:
                out[f.name] = v
        return out


_RENAMES = {"class": "cls"}


def _section_dict(obj) -> dict:
    inv = {v: k for k, v in _RENAMES.items()}
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        out[inv.get(f.name, f.name)] = list(v) if isinstance(v, tuple) else v
    return out


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = _RENAMES.get(key, key)
        if name not in names:
            raise ConfigError(f"{where}: unknown key '{key}'")
        default = getattr(cls(), name)
        if isinstance(default, tuple):
            if not isinstance(value, (list, tuple)) or len(value) != len(default):
                raise ConfigError(f"{where}.{key}: expected a list of {len(default)} values")
            value = tuple(value)
        kwargs[name] = value
    return cls(**kwargs)


def parse_config(data: dict) -> MissionConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    sections = {"robot": RobotSection, "mapping_sensor": SensorSection,
                "gain_sensor": SensorSection, "planner": PlannerSection,
                "artifacts": ArtifactSection, "log": LogSection}
    scalars = {"resolution", "time_limit", "dt", "seed"}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in sections:
            base = MissionConfig.__dataclass_fields__[key].default_factory()
            merged = {**_section_dict(base), **value} if isinstance(value, dict) else value
            kwargs[key] = _build(sections[key], merged, key)
        elif key == "cameras":
            if not isinstance(value, list):
                raise ConfigError("cameras: expected a list")
            kwargs[key] = [_build(CameraSection, c, f"cameras[{i}]") for i, c in enumerate(value)]
        elif key in scalars:
            kwargs[key] = value
        else:
            raise ConfigError(f"config: unknown key '{key}'")
    try:
        return MissionConfig(**kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def load_config(path: str | Path | None) -> MissionConfig:
    if path is None:
        return MissionConfig()
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    return parse_config(data)


def with_overrides(cfg: MissionConfig, **changes) -> MissionConfig:
    return replace(cfg, **changes)
