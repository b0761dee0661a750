"""Local exploration: random graph in the local bound, Dijkstra paths, path gain, headings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .dtw import path_similarity, straight_reference
from .graph import ExplorationGraph, PathKind, PlannedPath, cumulative_lengths, shortest_paths
from .sensor import SensorFrustum, volume_gains
from .voxel_map import Box, LocalBound, MapSnapshot, RobotConfig, wrap_angle


class DegenerateRoot(RuntimeError):
    """The robot box at the local root is itself inadmissible."""


@dataclass
class GainParams:
    zeta: float = 0.3
    delta_gain: float = 0.15
    direction: tuple[float, float, float] = (0.0, 0.0, 0.0)
    threshold: float = 30.0

    def __post_init__(self):
        if self.zeta < 0 or self.delta_gain < 0 or self.threshold <= 0:
            raise ValueError("zeta, delta_gain must be >= 0 and threshold > 0")
        n = float(np.linalg.norm(self.direction))
        if n != 0.0 and abs(n - 1.0) > 1e-6:
            raise ValueError("exploration direction must be a unit vector or zero")


@dataclass
class LocalParams:
    bound_dims: tuple[float, float, float] = (20.0, 20.0, 3.0)
    n_samples: int = 300
    edge_radius: float = 1.0
    mode: str = "horizontal"
    vertical_bonus: float = 200.0
    floor_height: float = 2.5
    max_attempts_factor: int = 20
    planar: bool = False


@dataclass
class LocalPlanResult:
    path: PlannedPath | None
    graph: ExplorationGraph
    paths: dict[int, PlannedPath] = field(default_factory=dict)

    @property
    def local_completion(self) -> bool:
        return self.path is None


def _sample(rng: np.random.Generator, n: int, root: np.ndarray, region: Box,
            bound: LocalBound, mode: str, planar: bool) -> np.ndarray:
    lo, hi = np.array(region.lo), np.array(region.hi)
    if mode == "vertical":
        sd = np.array(bound.dims[:2]) / 4.0
        xy = rng.normal(root[:2], sd, size=(n, 2))
        z = rng.uniform(lo[2], hi[2], size=n)
        pts = np.column_stack([xy, z])
    else:
        pts = rng.uniform(lo, hi, size=(n, 3))
    if planar:
        pts[:, 2] = root[2]
    inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    return pts[inside]


def build_local_graph(snap: MapSnapshot, root: RobotConfig, bound: LocalBound,
                      n_samples: int, edge_radius: float, mode: str,
                      rng: np.random.Generator, planar: bool = False,
                      max_attempts_factor: int = 20) -> ExplorationGraph:
    """Random admissible vertices in the bound, linked within ``edge_radius``.

    Vertices not connected to the root are dropped. Raises DegenerateRoot when
    the root box is inadmissible.
    """
    if mode not in ("horizontal", "vertical"):
        raise ValueError(f"unknown local mode {mode!r}")
    half = root.half_extents
    if not snap.config_admissible(root):
        raise DegenerateRoot(f"root at {root.position.tolist()} is not admissible")
    bb = bound.box()
    mb = Box(tuple(snap.origin), tuple(snap.origin + np.array(snap.extents) * snap.resolution))
    lo = np.maximum(bb.lo, mb.lo)
    hi = np.maximum(lo, np.minimum(bb.hi, mb.hi))
    region = Box(tuple(lo), tuple(hi))
    rp = root.position
    accepted: list[np.ndarray] = []
    n_acc = 0
    attempts = 0
    max_attempts = max_attempts_factor * n_samples
    while n_acc < n_samples and attempts < max_attempts:
        batch = min(max(n_samples, 64), max_attempts - attempts)
        attempts += batch
        cand = _sample(rng, batch, rp, region, bound, mode, planar)
        if len(cand) == 0:
            continue
        ok = cand[snap.boxes_admissible(cand, half)]
        take = ok[: n_samples - n_acc]
        accepted.append(take)
        n_acc += len(take)
    pts = np.vstack([rp[None]] + accepted) if accepted else rp[None]

    edges: list[tuple[int, int]] = []
    if len(pts) > 1:
        pairs = cKDTree(pts).query_pairs(edge_radius, output_type="ndarray")
        if len(pairs):
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
            ok = snap.segments_admissible(pts[pairs[:, 0]], pts[pairs[:, 1]], half)
            edges = [tuple(p) for p in pairs[ok]]

    adj: dict[int, list[int]] = {i: [] for i in range(len(pts))}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)

    g = ExplorationGraph()
    remap = {}
    for i in sorted(seen):
        cfg = root if i == 0 else root.moved(pts[i])
        remap[i] = g.add_vertex(cfg)
    for a, b in edges:
        if a in seen and b in seen:
            g.add_edge(remap[a], remap[b], float(np.linalg.norm(pts[a] - pts[b])))
    return g


def exploration_gain(points, vertex_gains, params: GainParams) -> float:
    """exp(-zeta Z) * sum_j gain_j * exp(-delta_gain * D_j) along one path."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    gains = np.asarray(vertex_gains, dtype=float)
    d = cumulative_lengths(pts)
    total = float(np.sum(gains * np.exp(-params.delta_gain * d)))
    z = similarity_to_direction(pts, params.direction)
    return math.exp(-params.zeta * z) * total


def similarity_to_direction(points, direction) -> float:
    """DTW distance to the straight path of equal length along direction (0 if unset)."""
    direction = np.asarray(direction, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if not np.any(direction) or len(pts) < 2:
        return 0.0
    length = float(cumulative_lengths(pts)[-1])
    if length == 0.0:
        return 0.0
    return path_similarity(pts, straight_reference(pts[0], direction, length))


def path_gain(path: PlannedPath, snap: MapSnapshot, frustum: SensorFrustum,
              params: GainParams) -> float:
    gains = volume_gains(path.configs, frustum, snap)
    return exploration_gain(path.points, gains, params)


def assign_headings(path: PlannedPath, v_ref: float, yaw_rate_max: float,
                    robot_class: str) -> PlannedPath:
    """Headings along segment directions; aerial turns are limited by the yaw rate.

    Legged robots turn in place, so each vertex takes the direction of its
    outgoing segment (the last vertex keeps the final segment's). Aerial
    robots keep the first vertex's heading and move toward each segment
    direction by at most yaw_rate_max * length / v_ref per segment.
    Segments with no horizontal extent carry the heading over.
    """
    cfgs = path.configs
    if len(cfgs) < 2:
        return PlannedPath(list(cfgs), list(path.vertex_ids), path.gain, path.kind)
    pts = path.points
    seg_dir: list[float | None] = []
    for a, b in zip(pts[:-1], pts[1:]):
        dx, dy = b[0] - a[0], b[1] - a[1]
        seg_dir.append(math.atan2(dy, dx) if math.hypot(dx, dy) > 1e-9 else None)
    headings = [cfgs[0].heading]
    if robot_class == "legged":
        cur = cfgs[0].heading
        out = []
        for d in seg_dir:
            if d is not None:
                cur = d
            out.append(cur)
        headings = out + [out[-1]]
    elif robot_class == "aerial":
        cur = cfgs[0].heading
        for (a, b), d in zip(zip(pts[:-1], pts[1:]), seg_dir):
            if d is not None:
                limit = yaw_rate_max * float(np.linalg.norm(b - a)) / v_ref
                cur = wrap_angle(cur + float(np.clip(wrap_angle(d - cur), -limit, limit)))
            headings.append(cur)
    else:
        raise ValueError(f"unknown robot class {robot_class!r}")
    new = [c.moved(c.position, h) for c, h in zip(cfgs, headings)]
    return PlannedPath(new, list(path.vertex_ids), path.gain, path.kind)


def select_best(paths: dict[int, PlannedPath]) -> PlannedPath | None:
    """Max gain, then shorter length, then lower terminal vertex id."""
    best = None
    best_key = None
    for vid in sorted(paths):
        p = paths[vid]
        key = (-p.gain, p.length, vid)
        if best_key is None or key < best_key:
            best, best_key = p, key
    return best


def plan_local(snap: MapSnapshot, root: RobotConfig, frustum: SensorFrustum,
               gain: GainParams, local: LocalParams, rng: np.random.Generator,
               v_ref: float = 1.0, yaw_rate_max: float = 1.0,
               robot_class: str = "aerial") -> LocalPlanResult:
    """Best local path by exploration gain, or local completion below threshold."""
    bound = LocalBound(tuple(root.position), tuple(local.bound_dims))
    g = build_local_graph(snap, root, bound, local.n_samples, local.edge_radius, local.mode,
                          rng, planar=local.planar,
                          max_attempts_factor=local.max_attempts_factor)
    ids = g.ids()
    gains = volume_gains([g.vertices[i].config for i in ids], frustum, snap).astype(float)
    # vertices keep the raw VolumeGain (frontier bookkeeping uses it); the
    # vertical-mode bonus only enters the path gain
    scored = dict(zip(ids, gains))
    if local.mode == "vertical":
        dz = np.abs(g.positions(ids)[:, 2] - root.z)
        for i, d in zip(ids, dz):
            if d > local.floor_height:
                scored[i] += local.vertical_bonus
    for i, v in zip(ids, gains):
        g.vertices[i].gain = float(v)

    paths = shortest_paths(g, PathKind.LOCAL)
    for p in paths.values():
        p.gain = exploration_gain(p.points, [scored[i] for i in p.vertex_ids], gain)
    best = select_best(paths)
    if best is None or best.gain < gain.threshold:
        return LocalPlanResult(None, g, paths)
    best = assign_headings(best, v_ref, yaw_rate_max, robot_class)
    return LocalPlanResult(best, g, paths)
