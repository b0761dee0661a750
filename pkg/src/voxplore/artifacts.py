"""Artifact detection, map projection, per-class Bayes filtering, and scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit

from .voxel_map import MapSnapshot, RobotConfig

SCORE_RADIUS = 5.0


class ArtifactClass(str, Enum):
    SURVIVOR = "Survivor"
    CELL_PHONE = "CellPhone"
    BACKPACK = "Backpack"
    DRILL = "Drill"
    FIRE_EXTINGUISHER = "FireExtinguisher"
    GAS = "Gas"
    VENT = "Vent"


# detected by signal strength at the robot, not by camera
RANGE_ONLY = frozenset({ArtifactClass.CELL_PHONE, ArtifactClass.GAS})


class NoSurfaceHit(RuntimeError):
    pass


@dataclass(frozen=True)
class Artifact:
    id: str
    cls: ArtifactClass
    position: tuple[float, float, float]


@dataclass(frozen=True)
class Camera:
    """Pinhole camera fixed on the robot body."""

    fov_h: float = math.radians(90.0)
    fov_v: float = math.radians(60.0)
    max_range: float = 8.0
    yaw: float = 0.0
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not (0 < self.fov_h < math.pi and 0 < self.fov_v < math.pi):
            raise ValueError("pinhole camera FOV must be below pi on both axes")

    def frame(self, pose: RobotConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Camera origin and its forward/left/up unit axes in the world."""
        yaw = pose.heading + self.yaw
        fwd = np.array([math.cos(yaw), math.sin(yaw), 0.0])
        left = np.array([-math.sin(yaw), math.cos(yaw), 0.0])
        up = np.array([0.0, 0.0, 1.0])
        c, s = math.cos(pose.heading), math.sin(pose.heading)
        ox, oy, oz = self.offset
        origin = pose.position + np.array([c * ox - s * oy, s * ox + c * oy, oz])
        return origin, fwd, left, up

    def project(self, pose: RobotConfig, point) -> tuple[float, float, float] | None:
        """Normalised image coordinates (u right, v down) and depth, or None if behind."""
        o, fwd, left, up = self.frame(pose)
        v = np.asarray(point, dtype=float) - o
        depth = float(v @ fwd)
        if depth <= 1e-9:
            return None
        u = 0.5 - float(v @ left) / depth / (2 * math.tan(self.fov_h / 2))
        w = 0.5 - float(v @ up) / depth / (2 * math.tan(self.fov_v / 2))
        return u, w, depth

    def ray(self, pose: RobotConfig, u: float, v: float) -> np.ndarray:
        _, fwd, left, up = self.frame(pose)
        d = (fwd - left * (u - 0.5) * 2 * math.tan(self.fov_h / 2)
             - up * (v - 0.5) * 2 * math.tan(self.fov_v / 2))
        return d / np.linalg.norm(d)


@dataclass
class Detection:
    t: float
    pose: RobotConfig
    box: tuple[float, float, float, float]
    cls: ArtifactClass
    camera: Camera | None = None
    artifact_id: str | None = None

    def __post_init__(self):
        u0, v0, u1, v1 = self.box
        if not (0 <= u0 <= u1 <= 1 and 0 <= v0 <= v1 <= 1):
            raise ValueError(f"box {self.box} outside the unit image")


@dataclass
class DetectorParams:
    object_size: float = 0.5
    false_negative_rate: float = 0.0
    box_jitter: float = 0.0
    proximity_range: float = 3.0


def simulate_detection(t: float, pose: RobotConfig, cameras: list[Camera],
                       artifacts: list[Artifact], snap: MapSnapshot,
                       params: DetectorParams, rng: np.random.Generator) -> list[Detection]:
    """Geometric stand-in for a visual detector.

    A visual artifact is detected when it projects inside a camera image within
    range and the map shows no Occupied voxel on the line of sight. Range-only
    classes trigger within ``proximity_range`` of the robot.
    """
    out = []
    for art in artifacts:
        p = np.asarray(art.position, dtype=float)
        if art.cls in RANGE_ONLY:
            if np.linalg.norm(p - pose.position) <= params.proximity_range:
                if params.false_negative_rate and rng.random() < params.false_negative_rate:
                    continue
                out.append(Detection(t, pose, (0.0, 0.0, 1.0, 1.0), art.cls, None, art.id))
            continue
        for cam in cameras:
            proj = cam.project(pose, p)
            if proj is None:
                continue
            u, v, depth = proj
            if not (0 <= u <= 1 and 0 <= v <= 1) or np.linalg.norm(p - cam.frame(pose)[0]) > cam.max_range:
                continue
            if not snap.line_of_sight(cam.frame(pose)[0], p):
                continue
            if params.false_negative_rate and rng.random() < params.false_negative_rate:
                continue
            if params.box_jitter:
                u += rng.normal(0.0, params.box_jitter)
                v += rng.normal(0.0, params.box_jitter)
            hw = params.object_size / depth / (2 * math.tan(cam.fov_h / 2)) / 2
            hh = params.object_size / depth / (2 * math.tan(cam.fov_v / 2)) / 2
            box = (float(np.clip(u - hw, 0, 1)), float(np.clip(v - hh, 0, 1)),
                   float(np.clip(u + hw, 0, 1)), float(np.clip(v + hh, 0, 1)))
            if box[2] <= box[0] or box[3] <= box[1]:
                continue
            out.append(Detection(t, pose, box, art.cls, cam, art.id))
            break
    return out


def bbox_to_point(det: Detection, snap: MapSnapshot, grid: tuple[int, int] = (5, 5),
                  max_range: float = 16.0) -> np.ndarray:
    """Median-range surface point of rays through the box's grid-cell centres.

    With an even number of surviving rays the lower median is taken.
    """
    cam = det.camera
    if cam is None:
        raise ValueError("range-only detections have no image box")
    u0, v0, u1, v1 = det.box
    rows, cols = grid
    if u1 <= u0 or v1 <= v0:
        raise ValueError("empty bounding box")
    origin = cam.frame(det.pose)[0]
    dirs = np.array([cam.ray(det.pose, u0 + (j + 0.5) / cols * (u1 - u0),
                             v0 + (i + 0.5) / rows * (v1 - v0))
                     for i in range(rows) for j in range(cols)])
    t = snap.first_occupied(origin, dirs, max_range)
    keep = np.flatnonzero(np.isfinite(t))
    if len(keep) == 0:
        raise NoSurfaceHit("no ray reached an occupied voxel")
    order = keep[np.argsort(t[keep], kind="stable")]
    k = order[(len(order) - 1) // 2]
    return origin + dirs[k] * t[k]


@dataclass
class ArtifactHypothesis:
    id: int
    center: np.ndarray
    radius: float
    log_odds: dict[ArtifactClass, float] = field(default_factory=dict)
    count: int = 0
    frozen: bool = False
    representative: Detection | None = None

    def probability(self, cls: ArtifactClass) -> float:
        return float(expit(self.log_odds.get(cls, 0.0)))

    def best_class(self) -> ArtifactClass:
        return max(self.log_odds, key=lambda c: (self.log_odds[c], c.value))


@dataclass
class Report:
    cls: ArtifactClass
    position: tuple[float, float, float]
    hypothesis_id: int
    t: float = 0.0
    scored: bool | None = None
    error: float | None = None
    artifact_id: str | None = None

    def to_record(self) -> dict:
        return {"t": round(self.t, 6), "class": self.cls.value,
                "position": [float(v) for v in self.position],
                "hypothesis_id": self.hypothesis_id, "scored": self.scored,
                "error": None if self.error is None else float(self.error),
                "artifact_id": self.artifact_id}


def log_odds_step(p_hit: float, p_miss: float) -> float:
    return math.log(p_hit / p_miss)


def associate_and_update(point, cls: ArtifactClass, hypotheses: list[ArtifactHypothesis],
                         radius: float, p_hit: float = 0.7, p_miss: float = 0.3,
                         detection: Detection | None = None,
                         new_id: int | None = None) -> ArtifactHypothesis | None:
    """Fold one projected detection into the hypothesis store.

    Points landing inside a frozen sphere are ignored (returns None). Otherwise
    the nearest unfrozen sphere within ``radius`` absorbs the point, or a new
    hypothesis is opened at it from prior 0.5 (id ``new_id``, default the list
    length) and appended to ``hypotheses``.
    """
    p = np.asarray(point, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("detection point must be finite")
    nearest = None
    best = math.inf
    for h in hypotheses:
        d = float(np.linalg.norm(h.center - p))
        if d > radius:
            continue
        if h.frozen:
            return None
        if d < best:
            nearest, best = h, d
    if nearest is None:
        hid = len(hypotheses) if new_id is None else new_id
        nearest = ArtifactHypothesis(hid, p.copy(), radius)
        hypotheses.append(nearest)
    else:
        nearest.center = nearest.center + (p - nearest.center) / (nearest.count + 1)
    nearest.count += 1
    nearest.log_odds[cls] = nearest.log_odds.get(cls, 0.0) + log_odds_step(p_hit, p_miss)
    if detection is not None and nearest.representative is None:
        nearest.representative = detection
    return nearest


def confirm_and_freeze(h: ArtifactHypothesis, threshold: float, t: float = 0.0) -> Report | None:
    if h.frozen or not h.log_odds:
        return None
    cls = h.best_class()
    if h.probability(cls) > threshold:
        h.frozen = True
        return Report(cls, tuple(float(v) for v in h.center), h.id, t)
    return None


def score_report(report: Report, artifacts: list[Artifact], consumed: set[str]) -> bool:
    """Score against the nearest unconsumed same-class artifact within 5 m."""
    p = np.asarray(report.position)
    best, best_d = None, math.inf
    for a in artifacts:
        if a.cls != report.cls or a.id in consumed:
            continue
        d = float(np.linalg.norm(np.asarray(a.position) - p))
        if d < best_d:
            best, best_d = a, d
    report.error = _class_error(report, artifacts)
    if best is not None and best_d <= SCORE_RADIUS:
        consumed.add(best.id)
        report.scored = True
        report.artifact_id = best.id
    else:
        report.scored = False
    return report.scored


def _class_error(report: Report, artifacts: list[Artifact]) -> float | None:
    d = [float(np.linalg.norm(np.asarray(a.position) - np.asarray(report.position)))
         for a in artifacts if a.cls == report.cls]
    return min(d) if d else None


@dataclass
class ArtifactParams:
    radius: float = 1.0
    grid: tuple[int, int] = (5, 5)
    p_hit: float = 0.7
    p_miss: float = 0.3
    threshold: float = 0.9
    range_only_radius: float = 3.0


class ArtifactTracker:
    """Hypothesis store fed in detection-time order.

    Range-only detections are localised only to within the detection range, so
    they are associated among themselves with the wider ``range_only_radius``.
    """

    def __init__(self, params: ArtifactParams):
        self.params = params
        self.hypotheses: list[ArtifactHypothesis] = []
        self.reports: list[Report] = []
        self._stores: dict[bool, list[ArtifactHypothesis]] = {False: [], True: []}

    def process(self, point, cls: ArtifactClass, t: float,
                detection: Detection | None = None) -> Report | None:
        p = self.params
        ranged = cls in RANGE_ONLY
        store = self._stores[ranged]
        radius = p.range_only_radius if ranged else p.radius
        before = len(store)
        h = associate_and_update(point, cls, store, radius, p.p_hit, p.p_miss,
                                 detection, new_id=len(self.hypotheses))
        if len(store) > before:
            self.hypotheses.append(h)
        if h is None:
            return None
        rep = confirm_and_freeze(h, p.threshold, t)
        if rep is not None:
            self.reports.append(rep)
        return rep
