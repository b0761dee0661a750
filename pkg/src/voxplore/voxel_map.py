"""Dense fixed-resolution occupancy grid with geofences and admissibility queries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K


class VoxelState(IntEnum):
    UNKNOWN = K.UNKNOWN
    FREE = K.FREE
    OCCUPIED = K.OCCUPIED


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    w = math.atan2(math.sin(a), math.cos(a))
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class RobotConfig:
    """Position, heading and robot bounding-box half extents."""

    x: float
    y: float
    z: float
    heading: float = 0.0
    half_extents: tuple[float, float, float] = (0.3, 0.3, 0.3)

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))
        he = tuple(float(h) for h in self.half_extents)
        if len(he) != 3 or min(he) <= 0:
            raise ValueError(f"half extents must be three positive lengths, got {he}")
        object.__setattr__(self, "half_extents", he)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def moved(self, position: Sequence[float], heading: float | None = None) -> RobotConfig:
        h = self.heading if heading is None else heading
        return RobotConfig(float(position[0]), float(position[1]), float(position[2]),
                           h, self.half_extents)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its min and max corners (metres)."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError(f"box corners out of order: {lo} {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def around(cls, center: Sequence[float], half: Sequence[float]) -> Box:
        return cls(tuple(c - h for c, h in zip(center, half)),
                   tuple(c + h for c, h in zip(center, half)))

    def contains(self, p: Sequence[float]) -> bool:
        return all(l <= v <= h for l, v, h in zip(self.lo, p, self.hi))

    def overlaps(self, other: Box) -> bool:
        return all(l1 < h2 and h1 > l2 for l1, h1, l2, h2
                   in zip(self.lo, self.hi, other.lo, other.hi))

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.lo) + np.array(self.hi)) / 2

    @property
    def size(self) -> np.ndarray:
        return np.array(self.hi) - np.array(self.lo)

    def as_row(self) -> list[float]:
        return [*self.lo, *self.hi]


@dataclass(frozen=True)
class LocalBound:
    center: tuple[float, float, float]
    dims: tuple[float, float, float]

    def __post_init__(self):
        if min(self.dims) <= 0:
            raise ValueError("local bound dimensions must be positive")

    def box(self) -> Box:
        return Box.around(self.center, [d / 2 for d in self.dims])


class VoxelMap:
    """Occupancy grid over ``extents`` voxels starting at ``origin``.

    Every voxel starts Unknown. Points outside the grid classify as Unknown.
    """

    def __init__(self, origin: Sequence[float], resolution: float = 0.2,
                 extents: Sequence[int] = (32, 32, 32)):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.origin = np.asarray(origin, dtype=float).copy()
        self.resolution = float(resolution)
        self.extents = tuple(int(e) for e in extents)
        self.state = np.zeros(self.extents, dtype=np.uint8)
        self._fences: list[Box] = []

    @classmethod
    def covering(cls, bounds: Box, resolution: float = 0.2) -> VoxelMap:
        ext = [int(math.ceil(s / resolution - 1e-9)) for s in bounds.size]
        return cls(bounds.lo, resolution, ext)

    # geometry helpers -------------------------------------------------

    @property
    def bounds(self) -> Box:
        hi = self.origin + np.array(self.extents) * self.resolution
        return Box(tuple(self.origin), tuple(hi))

    def to_voxel_coords(self, p) -> np.ndarray:
        return (np.asarray(p, dtype=float) - self.origin) / self.resolution

    def index_of(self, p) -> tuple[int, int, int]:
        return tuple(int(v) for v in np.floor(self.to_voxel_coords(p)))

    def in_bounds(self, idx) -> bool:
        return all(0 <= i < n for i, n in zip(idx, self.extents))

    def center_of(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    # queries ----------------------------------------------------------

    def classify(self, p) -> VoxelState:
        idx = self.index_of(p)
        if not self.in_bounds(idx):
            return VoxelState.UNKNOWN
        return VoxelState(int(self.state[idx]))

    def count(self, s: VoxelState) -> int:
        return int(np.count_nonzero(self.state == s))

    @property
    def geofences(self) -> tuple[Box, ...]:
        return tuple(self._fences)

    # updates ----------------------------------------------------------

    def integrate_scan(self, sensor_origin, directions, ranges, hits, max_range: float) -> None:
        """Integrate one scan of unit ``directions`` (N,3) with metric ``ranges``.

        ``hits[i]`` is False for max-range returns, which carve free space along
        their whole length.
        """
        directions = np.ascontiguousarray(directions, dtype=float).reshape(-1, 3)
        if len(directions) == 0:
            return
        r = self.resolution
        p = self.to_voxel_coords(sensor_origin)
        ranges_v = np.asarray(ranges, dtype=float) / r
        idx, t = K.buffer_for(max(max_range / r, float(ranges_v.max(initial=0.0))))
        K.integrate_rays(self.state, p, directions, ranges_v, np.asarray(hits, dtype=bool),
                         max_range / r, idx, t)

    def add_geofence(self, box: Box) -> None:
        b = self.bounds
        lo = np.clip(box.lo, b.lo, b.hi)
        hi = np.clip(box.hi, b.lo, b.hi)
        clamped = Box(tuple(lo), tuple(hi))
        if np.any(clamped.size <= 0):
            return
        if clamped not in self._fences:
            self._fences.append(clamped)

    def snapshot(self) -> MapSnapshot:
        return MapSnapshot(self)

    # text export ------------------------------------------------------

    def export_text(self, path: str | Path, include_unknown: bool = False) -> None:
        with open(path, "w") as fh:
            fh.write(f"# origin {' '.join(repr(float(v)) for v in self.origin)}\n")
            fh.write(f"# resolution {self.resolution!r}\n")
            fh.write(f"# extents {' '.join(str(e) for e in self.extents)}\n")
            for f in self._fences:
                fh.write(f"# geofence {' '.join(repr(v) for v in f.as_row())}\n")
            mask = np.ones_like(self.state, dtype=bool) if include_unknown \
                else self.state != VoxelState.UNKNOWN
            for i, j, k in np.argwhere(mask):
                fh.write(f"{i} {j} {k} {VoxelState(int(self.state[i, j, k])).name}\n")

    @classmethod
    def import_text(cls, path: str | Path) -> VoxelMap:
        header: dict[str, list[str]] = {}
        fences: list[Box] = []
        cells: list[tuple[int, int, int, VoxelState]] = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, *vals = line[1:].split()
                    if key == "geofence":
                        row = [float(v) for v in vals]
                        fences.append(Box(tuple(row[:3]), tuple(row[3:])))
                    else:
                        header[key] = vals
                    continue
                parts = line.split()
                if len(parts) != 4:
                    raise ValueError(f"{path}:{lineno}: expected 'i j k STATE'")
                cells.append((int(parts[0]), int(parts[1]), int(parts[2]),
                              VoxelState[parts[3]]))
        for key in ("origin", "resolution", "extents"):
            if key not in header:
                raise ValueError(f"{path}: missing header '{key}'")
        m = cls([float(v) for v in header["origin"]], float(header["resolution"][0]),
                [int(v) for v in header["extents"]])
        for i, j, k, s in cells:
            m.state[i, j, k] = s
        m._fences = fences
        return m


class MapSnapshot:
    """Read-only copy of a map taken at the start of a planning iteration.

    Holds a summed-volume table of non-free voxels so any box query costs
    eight lookups.
    """

    def __init__(self, vmap: VoxelMap):
        self.origin = vmap.origin.copy()
        self.resolution = vmap.resolution
        self.extents = vmap.extents
        self.state = vmap.state.copy()
        self.state.setflags(write=False)
        self.geofences = vmap.geofences
        blocked = (self.state != VoxelState.FREE).astype(np.int32)
        sat = np.zeros(tuple(e + 1 for e in self.extents), dtype=np.int32)
        sat[1:, 1:, 1:] = blocked.cumsum(0).cumsum(1).cumsum(2)
        self._sat = sat
        self._fence_rows = np.array([f.as_row() for f in self.geofences],
                                    dtype=float).reshape(-1, 6)
        # per-snapshot scratch for de-duplicating counted voxels
        self._stamp = np.zeros(self.extents, dtype=np.int64)
        self._stamp_next = 1

    @classmethod
    def live(cls, vmap: VoxelMap) -> MapSnapshot:
        """Ray queries on the current grid without copying; no box queries."""
        out = object.__new__(cls)
        out.origin = vmap.origin
        out.resolution = vmap.resolution
        out.extents = vmap.extents
        out.state = vmap.state
        out.geofences = vmap.geofences
        out._sat = None
        out._fence_rows = np.zeros((0, 6))
        out._stamp = None
        out._stamp_next = 1
        return out

    def with_geofences(self, fences: Iterable[Box]) -> MapSnapshot:
        out = object.__new__(MapSnapshot)
        out.__dict__.update(self.__dict__)
        out.geofences = tuple(fences)
        out._fence_rows = np.array([f.as_row() for f in out.geofences],
                                   dtype=float).reshape(-1, 6)
        return out

    def to_voxel_coords(self, p) -> np.ndarray:
        return (np.asarray(p, dtype=float) - self.origin) / self.resolution

    def classify(self, p) -> VoxelState:
        idx = tuple(int(v) for v in np.floor(self.to_voxel_coords(p)))
        if not all(0 <= i < n for i, n in zip(idx, self.extents)):
            return VoxelState.UNKNOWN
        return VoxelState(int(self.state[idx]))

    def take_stamps(self, n: int) -> int:
        base = self._stamp_next
        self._stamp_next += n
        return base

    def boxes_admissible(self, points, half_extents) -> np.ndarray:
        pts = np.ascontiguousarray(points, dtype=float).reshape(-1, 3)
        return K.boxes_admissible(self._sat, self.origin, self.resolution, self._fence_rows,
                                  pts, np.asarray(half_extents, dtype=float))

    def config_admissible(self, cfg: RobotConfig) -> bool:
        return bool(self.boxes_admissible(cfg.position[None], cfg.half_extents)[0])

    def segments_admissible(self, a, b, half_extents) -> np.ndarray:
        a = np.ascontiguousarray(a, dtype=float).reshape(-1, 3)
        b = np.ascontiguousarray(b, dtype=float).reshape(-1, 3)
        return K.segments_admissible(self._sat, self.origin, self.resolution,
                                     self._fence_rows, a, b,
                                     np.asarray(half_extents, dtype=float))

    def segment_admissible(self, a, b, half_extents) -> bool:
        return bool(self.segments_admissible(a, b, half_extents)[0])

    def path_admissible(self, points, half_extents) -> bool:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if len(pts) < 2:
            return len(pts) == 0 or bool(self.boxes_admissible(pts, half_extents)[0])
        return bool(np.all(self.segments_admissible(pts[:-1], pts[1:], half_extents)))

    def line_of_sight(self, a, b) -> bool:
        a_v = self.to_voxel_coords(a)
        b_v = self.to_voxel_coords(b)
        idx, t = K.buffer_for(float(np.linalg.norm(b_v - a_v)))
        return bool(K.line_of_sight(self.state, a_v, b_v, idx, t))

    def first_occupied(self, origin, directions, max_range: float) -> np.ndarray:
        """Metric distance to the first occupied voxel along each unit direction."""
        r = self.resolution
        dirs = np.ascontiguousarray(directions, dtype=float).reshape(-1, 3)
        idx, t = K.buffer_for(max_range / r)
        return K.first_occupied(self.state, self.to_voxel_coords(origin), dirs,
                                max_range / r, idx, t) * r


def sweep_placements(a, b, resolution: float) -> np.ndarray:
    """Robot-box centres tested for the segment a-b (same order rule as the kernel)."""
    p0 = tuple(float(v) for v in a)
    p1 = tuple(float(v) for v in b)
    if p1 < p0:
        p0, p1 = p1, p0
    n = K.sweep_count(*p0, *p1, resolution)
    p0a, p1a = np.array(p0), np.array(p1)
    return np.array([p0a + (p1a - p0a) * (k / n) for k in range(n + 1)])
