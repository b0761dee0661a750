"""Ground-truth worlds, robot kinematics along planned paths, and pose drift."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .artifacts import Artifact, ArtifactClass
from .graph import PlannedPath, cumulative_lengths
from .voxel_map import Box, RobotConfig

LOOKAHEAD = 0.30


class WorldError(ValueError):
    pass


@dataclass
class World:
    bounds: Box
    free_boxes: list[Box]
    start: RobotConfig
    home: tuple[float, float, float]
    non_traversable: list[Box] = field(default_factory=list)
    artifacts: list[Artifact] = field(default_factory=list)
    name: str = "world"

    @property
    def free_rows(self) -> np.ndarray:
        return np.array([b.as_row() for b in self.free_boxes], dtype=float).reshape(-1, 6)

    def is_free(self, p) -> bool:
        return any(b.contains(p) for b in self.free_boxes)

    def in_non_traversable(self, p) -> bool:
        return any(b.contains(p) for b in self.non_traversable)


@dataclass
class RobotModel:
    cls: str = "aerial"
    v_ref: float = 1.0
    yaw_rate_max: float = 1.0
    reverse_distance: float = 0.5
    endurance: float = 600.0
    half_extents: tuple[float, float, float] = (0.3, 0.3, 0.3)
    localization_sigma: float = 0.0

    def __post_init__(self):
        if self.cls not in ("legged", "aerial"):
            raise ValueError(f"robot class must be legged or aerial, not {self.cls!r}")
        if self.v_ref <= 0 or self.endurance <= 0:
            raise ValueError("v_ref and endurance must be positive")


def _vec3(value, where: str) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise WorldError(f"{where}: expected a list of 3 numbers, got {value!r}")
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise WorldError(f"{where}: expected numbers, got {value!r}") from None
    if not all(math.isfinite(v) for v in out):
        raise WorldError(f"{where}: values must be finite")
    return out


def _box(value, where: str) -> Box:
    if not isinstance(value, dict) or set(value) != {"min", "max"}:
        raise WorldError(f"{where}: expected an object with keys 'min' and 'max'")
    lo = _vec3(value["min"], f"{where}.min")
    hi = _vec3(value["max"], f"{where}.max")
    if any(h <= l for l, h in zip(lo, hi)):
        raise WorldError(f"{where}: max must exceed min on every axis")
    return Box(lo, hi)


WORLD_KEYS = {"name", "bounds", "free_boxes", "non_traversable", "artifacts", "start", "home"}


def parse_world(data: dict) -> World:
    if not isinstance(data, dict):
        raise WorldError("world: top level must be an object")
    unknown = set(data) - WORLD_KEYS
    if unknown:
        raise WorldError(f"world: unknown keys {sorted(unknown)}")
    for key in ("bounds", "free_boxes", "start", "home"):
        if key not in data:
            raise WorldError(f"world: missing required key '{key}'")
    bounds = _box(data["bounds"], "bounds")
    if not isinstance(data["free_boxes"], list) or not data["free_boxes"]:
        raise WorldError("free_boxes: expected a non-empty list")
    free = [_box(b, f"free_boxes[{i}]") for i, b in enumerate(data["free_boxes"])]
    nontrav = [_box(b, f"non_traversable[{i}]")
               for i, b in enumerate(data.get("non_traversable", []))]

    start = data["start"]
    if not isinstance(start, dict) or "position" not in start:
        raise WorldError("start: expected an object with 'position'")
    extra = set(start) - {"position", "heading"}
    if extra:
        raise WorldError(f"start: unknown keys {sorted(extra)}")
    spos = _vec3(start["position"], "start.position")
    start_cfg = RobotConfig(*spos, float(start.get("heading", 0.0)))
    home = _vec3(data["home"], "home")

    arts = []
    seen = set()
    for i, a in enumerate(data.get("artifacts", [])):
        where = f"artifacts[{i}]"
        if not isinstance(a, dict):
            raise WorldError(f"{where}: expected an object")
        extra = set(a) - {"id", "class", "position"}
        if extra:
            raise WorldError(f"{where}: unknown keys {sorted(extra)}")
        try:
            cls = ArtifactClass(a.get("class"))
        except ValueError:
            raise WorldError(f"{where}.class: unknown artifact class {a.get('class')!r}") from None
        pos = _vec3(a.get("position"), f"{where}.position")
        if not bounds.contains(pos):
            raise WorldError(f"{where}.position: {pos} lies outside the world bounds")
        aid = str(a.get("id", f"artifact-{i}"))
        if aid in seen:
            raise WorldError(f"{where}.id: duplicate artifact id {aid!r}")
        seen.add(aid)
        arts.append(Artifact(aid, cls, pos))

    world = World(bounds, free, start_cfg, home, nontrav, arts, str(data.get("name", "world")))
    if not bounds.contains(spos) or not world.is_free(spos):
        raise WorldError(f"start.position: {spos} is not in free space")
    if not world.is_free(home):
        raise WorldError(f"home: {home} is not in free space")
    return world


def load_world(path: str | Path) -> World:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise WorldError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    return parse_world(data)


class PathFollower:
    """Arc-length tracker along a planned path's polyline."""

    def __init__(self, path: PlannedPath):
        self.path = path
        self.points = path.points
        self.stations = cumulative_lengths(self.points)
        self.total = float(self.stations[-1]) if len(self.stations) else 0.0
        self.s = 0.0

    @property
    def done(self) -> bool:
        return self.s >= self.total - 1e-12

    def segment_index(self) -> int:
        if len(self.points) < 2:
            return 0
        i = int(np.searchsorted(self.stations, self.s, side="right")) - 1
        return min(max(i, 0), len(self.points) - 2)

    def position_at(self, s: float) -> np.ndarray:
        if len(self.points) == 1:
            return self.points[0].copy()
        return np.array([np.interp(s, self.stations, self.points[:, k]) for k in range(3)])

    def heading_at(self, s: float) -> float:
        cfgs = self.path.configs
        if len(cfgs) < 2:
            return cfgs[0].heading
        i = int(np.searchsorted(self.stations, s, side="right")) - 1
        i = min(max(i, 0), len(cfgs) - 2)
        return cfgs[i + 1].heading if s > self.stations[i] else cfgs[i].heading

    def direction(self) -> np.ndarray:
        if len(self.points) < 2:
            return np.zeros(3)
        i = self.segment_index()
        d = self.points[i + 1] - self.points[i]
        n = np.linalg.norm(d)
        return d / n if n > 0 else np.zeros(3)

    def advance(self, ds: float) -> float:
        old = self.s
        self.s = min(self.total, self.s + ds)
        return self.s - old


def step_robot(model: RobotModel, pose: RobotConfig, follower: PathFollower,
               dt: float) -> tuple[RobotConfig, float, bool]:
    """Advance v_ref*dt along the path (clamped at its end)."""
    moved = follower.advance(model.v_ref * dt)
    p = follower.position_at(follower.s)
    new = pose.moved(p, follower.heading_at(follower.s))
    return new, moved, follower.done


def traversability_lookahead(model: RobotModel, pose: RobotConfig, direction,
                             world: World, horizon: float = LOOKAHEAD) -> bool:
    """True (blocked) when projected positions up to ``horizon`` ahead hit a
    non-traversable region. Aerial robots are never blocked."""
    if model.cls != "legged" or not world.non_traversable:
        return False
    d = np.asarray(direction, dtype=float)
    n = np.linalg.norm(d)
    if n == 0:
        return world.in_non_traversable(pose.position)
    d = d / n
    for s in np.linspace(0.0, horizon, 7):
        if world.in_non_traversable(pose.position + d * s):
            return True
    return False


class LocalizationNoise:
    """Random-walk position drift: per-step increments N(0, sigma^2 dt) per axis."""

    def __init__(self, sigma: float, rng: np.random.Generator):
        self.sigma = float(sigma)
        self.rng = rng
        self.offset = np.zeros(3)

    def step(self, dt: float) -> None:
        if self.sigma > 0:
            self.offset = self.offset + self.rng.normal(0.0, self.sigma * math.sqrt(dt), 3)

    def report(self, pose: RobotConfig) -> RobotConfig:
        if self.sigma == 0:
            return pose
        return pose.moved(pose.position + self.offset)


def localization_noise(true_pose: RobotConfig, noise: LocalizationNoise, dt: float) -> RobotConfig:
    noise.step(dt)
    return noise.report(true_pose)
