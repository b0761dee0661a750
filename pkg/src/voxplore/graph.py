"""Undirected exploration graphs, Dijkstra, and planned-path records."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np

from .voxel_map import RobotConfig


class PathKind(str, Enum):
    LOCAL = "local"
    GLOBAL = "global"
    HOMING = "homing"
    REFINED = "refined"


@dataclass
class Vertex:
    id: int
    config: RobotConfig
    gain: float = 0.0
    frontier: bool = False


@dataclass
class PlannedPath:
    configs: list[RobotConfig]
    vertex_ids: list[int] = field(default_factory=list)
    gain: float = 0.0
    kind: PathKind = PathKind.LOCAL

    @property
    def points(self) -> np.ndarray:
        return np.array([c.position for c in self.configs]).reshape(-1, 3)

    @property
    def length(self) -> float:
        return polyline_length(self.points)

    @property
    def terminal_id(self) -> int:
        return self.vertex_ids[-1] if self.vertex_ids else -1

    def to_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "gain": float(self.gain),
            "length": self.length,
            "vertices": [[c.x, c.y, c.z, c.heading] for c in self.configs],
            "vertex_ids": list(self.vertex_ids),
        }


def polyline_length(points) -> float:
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(p) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))


def cumulative_lengths(points) -> np.ndarray:
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(p) == 0:
        return np.zeros(0)
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


class ExplorationGraph:
    """Vertices keyed by integer id, adjacency with Euclidean edge lengths."""

    def __init__(self):
        self.vertices: dict[int, Vertex] = {}
        self.adj: dict[int, dict[int, float]] = {}
        self.root: int | None = None
        self._next_id = 0

    def __len__(self) -> int:
        return len(self.vertices)

    def add_vertex(self, config: RobotConfig, gain: float = 0.0) -> int:
        vid = self._next_id
        self._next_id += 1
        self.vertices[vid] = Vertex(vid, config, gain)
        self.adj[vid] = {}
        if self.root is None:
            self.root = vid
        return vid

    def add_edge(self, a: int, b: int, length: float | None = None) -> None:
        if a == b:
            return
        if length is None:
            length = float(np.linalg.norm(self.vertices[a].config.position
                                          - self.vertices[b].config.position))
        self.adj[a][b] = length
        self.adj[b][a] = length

    def remove_edge(self, a: int, b: int) -> None:
        self.adj[a].pop(b, None)
        self.adj[b].pop(a, None)

    def remove_vertex(self, vid: int) -> None:
        for n in list(self.adj[vid]):
            self.adj[n].pop(vid, None)
        del self.adj[vid]
        del self.vertices[vid]

    def edges(self) -> list[tuple[int, int, float]]:
        return [(a, b, w) for a, nb in self.adj.items() for b, w in nb.items() if a < b]

    def ids(self) -> list[int]:
        return sorted(self.vertices)

    def positions(self, ids: Iterable[int] | None = None) -> np.ndarray:
        ids = self.ids() if ids is None else list(ids)
        return np.array([self.vertices[i].config.position for i in ids]).reshape(-1, 3)

    def dijkstra(self, source: int) -> tuple[dict[int, float], dict[int, int]]:
        """Shortest path lengths and parents from source (ties by lower id)."""
        dist = {source: 0.0}
        parent: dict[int, int] = {}
        done: set[int] = set()
        heap = [(0.0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in self.adj[u].items():
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    parent[v] = u
                    heapq.heappush(heap, (nd, v))
        return dist, parent

    def path_ids(self, parent: dict[int, int], source: int, target: int) -> list[int]:
        if target != source and target not in parent:
            return []
        out = [target]
        while out[-1] != source:
            out.append(parent[out[-1]])
        return out[::-1]

    def make_path(self, ids: list[int], kind: PathKind) -> PlannedPath:
        return PlannedPath([self.vertices[i].config for i in ids], list(ids), 0.0, kind)

    def reachable(self, source: int) -> set[int]:
        seen = {source}
        stack = [source]
        while stack:
            u = stack.pop()
            for v in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    def to_json(self) -> dict:
        return {
            "root": self.root,
            "vertices": [
                {"id": v.id, "position": [v.config.x, v.config.y, v.config.z],
                 "heading": v.config.heading, "gain": float(v.gain),
                 "frontier": bool(v.frontier)}
                for v in (self.vertices[i] for i in self.ids())
            ],
            "edges": [[a, b, w] for a, b, w in sorted(self.edges())],
        }


def shortest_paths(graph: ExplorationGraph, kind: PathKind = PathKind.LOCAL) -> dict[int, PlannedPath]:
    """One minimum-length path from the root to every other reachable vertex."""
    dist, parent = graph.dijkstra(graph.root)
    out = {}
    for vid in sorted(dist):
        if vid == graph.root:
            continue
        out[vid] = graph.make_path(graph.path_ids(parent, graph.root, vid), kind)
    return out
