"""Sparse mission-wide graph: frontier bookkeeping, repositioning and homing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .dtw import cluster_single_linkage, pairwise_similarity
from .graph import ExplorationGraph, PathKind, PlannedPath
from .sensor import SensorFrustum, volume_gains
from .voxel_map import Box, MapSnapshot, RobotConfig, sweep_placements


class UnreachableFrontier(RuntimeError):
    pass


@dataclass
class TimeBudget:
    remaining: float
    v_ref: float = 1.0
    eps_d: float = 0.02
    margin: float = 30.0

    def __post_init__(self):
        if self.v_ref <= 0:
            raise ValueError("v_ref must be positive")
        if self.eps_d < 0 or self.margin < 0:
            raise ValueError("eps_d and margin must be non-negative")


@dataclass
class Frontier:
    gain: float
    evaluated_at: float = 0.0


class GlobalGraph:
    """Graph rooted at the home vertex plus the current frontier set."""

    def __init__(self, home: RobotConfig):
        self.graph = ExplorationGraph()
        self.home = self.graph.add_vertex(home)
        self.frontiers: dict[int, Frontier] = {}
        self._home_dist: dict[int, float] | None = None

    def __len__(self) -> int:
        return len(self.graph)

    def invalidate(self) -> None:
        self._home_dist = None

    def home_distances(self) -> dict[int, float]:
        if self._home_dist is None:
            self._home_dist, _ = self.graph.dijkstra(self.home)
        return self._home_dist

    def position(self, vid: int) -> np.ndarray:
        return self.graph.vertices[vid].config.position

    def add_chain(self, start: int, configs: list[RobotConfig]) -> list[int]:
        """Append configs as a vertex chain hanging off ``start``.

        Returns one id per config (plus ``start`` first); a config coinciding with
        its predecessor reuses that id.
        """
        ids = [start]
        for c in configs:
            prev = ids[-1]
            if np.linalg.norm(c.position - self.position(prev)) < 1e-9:
                ids.append(prev)
                continue
            vid = self.graph.add_vertex(c)
            self.graph.add_edge(prev, vid)
            ids.append(vid)
        self.invalidate()
        return ids

    def connect_nearby(self, new_ids: list[int], snap: MapSnapshot, radius: float,
                       half_extents) -> int:
        """Add admissible edges from new vertices to other vertices within radius."""
        all_ids = self.graph.ids()
        pos = self.graph.positions(all_ids)
        tree = cKDTree(pos)
        new_set = set(new_ids)
        cand = []
        for vid in new_ids:
            p = self.position(vid)
            for j in tree.query_ball_point(p, radius):
                other = all_ids[j]
                if other == vid or other in self.graph.adj[vid]:
                    continue
                if other in new_set and other < vid:
                    continue
                cand.append((vid, other))
        if not cand:
            return 0
        a = np.array([self.position(u) for u, _ in cand])
        b = np.array([self.position(v) for _, v in cand])
        ok = snap.segments_admissible(a, b, half_extents)
        for (u, v), good in zip(cand, ok):
            if good:
                self.graph.add_edge(u, v)
        self.invalidate()
        return int(np.count_nonzero(ok))

    def nearest_frontier_distance(self, p) -> float:
        if not self.frontiers:
            return math.inf
        fp = np.array([self.position(f) for f in self.frontiers])
        return float(np.min(np.linalg.norm(fp - np.asarray(p), axis=1)))

    def prune_geofenced(self, fences: list[Box], half_extents, resolution: float) -> list[int]:
        """Drop edges whose swept robot box meets a geofence, then orphaned vertices."""
        half = np.asarray(half_extents, dtype=float)
        for a, b, _ in self.graph.edges():
            pa, pb = self.position(a), self.position(b)
            lo = np.minimum(pa, pb) - half
            hi = np.maximum(pa, pb) + half
            hull = Box(tuple(lo), tuple(hi))
            near = [f for f in fences if f.overlaps(hull)]
            if not near:
                continue
            for p in sweep_placements(pa, pb, resolution):
                box = Box.around(p, half)
                if any(f.overlaps(box) for f in near):
                    self.graph.remove_edge(a, b)
                    break
        keep = self.graph.reachable(self.home)
        dropped = [v for v in self.graph.ids() if v not in keep]
        for v in dropped:
            self.graph.remove_vertex(v)
            self.frontiers.pop(v, None)
        self.invalidate()
        return dropped

    def to_json(self) -> dict:
        out = self.graph.to_json()
        out["home"] = self.home
        for v in out["vertices"]:
            v["frontier"] = v["id"] in self.frontiers
            if v["frontier"]:
                v["gain"] = self.frontiers[v["id"]].gain
        return out


def extract_frontiers(local: ExplorationGraph, paths: dict[int, PlannedPath],
                      threshold: float) -> list[tuple[int, PlannedPath]]:
    """Local vertices whose VolumeGain exceeds threshold, with their root paths."""
    out = []
    for vid in local.ids():
        if vid == local.root or vid not in paths:
            continue
        if local.vertices[vid].gain > threshold:
            out.append((vid, paths[vid]))
    return out


def dedup_against_global(candidates: list[tuple[int, PlannedPath]], gg: GlobalGraph,
                         radius: float) -> list[tuple[int, PlannedPath]]:
    if not gg.frontiers:
        return list(candidates)
    fp = np.array([gg.position(f) for f in sorted(gg.frontiers)])
    out = []
    for vid, path in candidates:
        p = path.configs[-1].position
        if np.min(np.linalg.norm(fp - p, axis=1)) > radius:
            out.append((vid, path))
    return out


def cluster_and_select_principal(paths: list[PlannedPath], dtw_threshold: float) -> list[PlannedPath]:
    """Single-linkage DTW clusters; keep the longest path of each (ties: lower terminal id)."""
    if not paths:
        return []
    dist = pairwise_similarity([p.points for p in paths])
    principals = []
    for group in cluster_single_linkage(dist, dtw_threshold):
        best = min(group, key=lambda k: (-paths[k].length, paths[k].terminal_id))
        principals.append(paths[best])
    return principals


def merge_into_global(gg: GlobalGraph, attach: int, principals: list[PlannedPath],
                      frontier_gains: dict[int, float], snap: MapSnapshot, edge_radius: float,
                      frontier_radius: float, half_extents, now: float = 0.0) -> list[int]:
    """Add principal paths below ``attach`` and mark their terminals as frontiers.

    ``frontier_gains`` maps local terminal ids to VolumeGain. A terminal within
    ``frontier_radius`` of an existing frontier is added as a plain vertex.
    Returns the new frontier ids.
    """
    new_frontiers = []
    for p in principals:
        chain = gg.add_chain(attach, p.configs[1:])
        gg.connect_nearby(sorted(set(chain[1:])), snap, edge_radius, half_extents)
        term = chain[-1]
        if term == attach:
            continue
        if gg.nearest_frontier_distance(gg.position(term)) <= frontier_radius:
            continue
        gain = float(frontier_gains.get(p.terminal_id, 0.0))
        gg.frontiers[term] = Frontier(gain, now)
        gg.graph.vertices[term].frontier = True
        gg.graph.vertices[term].gain = gain
        new_frontiers.append(term)
    return new_frontiers


def reevaluate_frontiers(gg: GlobalGraph, snap: MapSnapshot, frustum: SensorFrustum,
                         threshold: float, now: float = 0.0) -> list[int]:
    """Recompute frontier gains; drop those no longer above threshold. Returns dropped ids."""
    ids = sorted(gg.frontiers)
    if not ids:
        return []
    gains = volume_gains([gg.graph.vertices[i].config for i in ids], frustum, snap)
    dropped = []
    for vid, g in zip(ids, gains):
        if g > threshold:
            gg.frontiers[vid] = Frontier(float(g), now)
            gg.graph.vertices[vid].gain = float(g)
        else:
            dropped.append(vid)
            del gg.frontiers[vid]
            gg.graph.vertices[vid].frontier = False
    return dropped


def travel_time(length: float, budget: TimeBudget) -> float:
    return length / budget.v_ref


def remaining_time(gg: GlobalGraph, cur: int, frontier: int, budget: TimeBudget,
                   cur_dist: dict[int, float] | None = None) -> float:
    """Exploration time left after reaching the frontier and returning home."""
    if cur_dist is None:
        cur_dist, _ = gg.graph.dijkstra(cur)
    if frontier not in cur_dist:
        raise UnreachableFrontier(f"frontier {frontier} unreachable from {cur}")
    home = gg.home_distances()
    if frontier not in home:
        raise UnreachableFrontier(f"frontier {frontier} cannot reach home")
    return remaining_time_from_lengths(budget, cur_dist[frontier], home[frontier])


def remaining_time_from_lengths(budget: TimeBudget, to_frontier: float, to_home: float) -> float:
    return budget.remaining - travel_time(to_frontier, budget) - travel_time(to_home, budget)


def global_gain(remaining: float, gain: float, distance: float, eps_d: float) -> float:
    """Remaining time x frontier VolumeGain x exp(-eps_d x distance)."""
    return remaining * gain * math.exp(-eps_d * distance)


def select_frontier(gg: GlobalGraph, cur: int, budget: TimeBudget) -> PlannedPath | None:
    """Global path to the feasible frontier with the largest global gain, if any.

    Ties go to the larger stored VolumeGain, then the lower vertex id.
    """
    dist, parent = gg.graph.dijkstra(cur)
    home = gg.home_distances()
    best_key = None
    best = None
    for fid in sorted(gg.frontiers):
        if fid not in dist or fid not in home or fid == cur:
            continue
        t = remaining_time_from_lengths(budget, dist[fid], home[fid])
        if t <= 0:
            continue
        g = gg.frontiers[fid].gain
        score = global_gain(t, g, dist[fid], budget.eps_d)
        key = (-score, -g, fid)
        if best_key is None or key < best_key:
            best_key, best = key, fid
    if best is None:
        return None
    path = gg.graph.make_path(gg.graph.path_ids(parent, cur, best), PathKind.GLOBAL)
    path.gain = -best_key[0]
    return path


def homing_path(gg: GlobalGraph, cur: int) -> PlannedPath:
    dist, parent = gg.graph.dijkstra(gg.home)
    if cur not in dist:
        raise UnreachableFrontier(f"vertex {cur} is disconnected from home")
    ids = gg.graph.path_ids(parent, gg.home, cur)[::-1]
    return gg.graph.make_path(ids, PathKind.HOMING)
