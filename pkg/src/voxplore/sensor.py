"""Frustum sensors: simulated range scans and unknown-voxel gain by ray casting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .voxel_map import MapSnapshot, RobotConfig


@dataclass(frozen=True)
class SensorFrustum:
    max_range: float = 5.0
    fov_h: float = 2 * math.pi
    fov_v: float = math.radians(30.0)
    step: float = math.radians(2.0)
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not 0 < self.fov_h <= 2 * math.pi + 1e-12:
            raise ValueError("horizontal FOV must lie in (0, 2pi]")
        if not 0 < self.fov_v <= math.pi + 1e-12:
            raise ValueError("vertical FOV must lie in (0, pi]")
        if self.max_range <= 0 or self.step <= 0:
            raise ValueError("range and angular step must be positive")
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))

    @property
    def full_circle(self) -> bool:
        return self.fov_h >= 2 * math.pi - 1e-9

    def directions(self) -> np.ndarray:
        """Unit ray directions in the sensor frame (heading along +x)."""
        return _ray_grid(self.fov_h, self.fov_v, self.step)

    def origin(self, cfg: RobotConfig) -> np.ndarray:
        c, s = math.cos(cfg.heading), math.sin(cfg.heading)
        ox, oy, oz = self.offset
        return cfg.position + np.array([c * ox - s * oy, s * ox + c * oy, oz])

    def world_directions(self, heading: float) -> np.ndarray:
        d = self.directions()
        c, s = math.cos(heading), math.sin(heading)
        out = np.empty_like(d)
        out[:, 0] = c * d[:, 0] - s * d[:, 1]
        out[:, 1] = s * d[:, 0] + c * d[:, 1]
        out[:, 2] = d[:, 2]
        return out


def _angles(fov: float, step: float, wrap: bool) -> np.ndarray:
    if wrap:
        n = int(round(2 * math.pi / step))
        if abs(n * step - 2 * math.pi) > 1e-9:
            n = int(math.floor(2 * math.pi / step + 1e-9))
    else:
        n = int(math.floor(fov / step + 1e-9)) + 1
    return np.array([-fov / 2 + i * step for i in range(n)])


@lru_cache(maxsize=32)
def _ray_grid(fov_h: float, fov_v: float, step: float) -> np.ndarray:
    az = _angles(fov_h, step, fov_h >= 2 * math.pi - 1e-9)
    el = _angles(fov_v, step, False)
    A, E = np.meshgrid(az, el, indexing="ij")
    d = np.stack([np.cos(E) * np.cos(A), np.cos(E) * np.sin(A), np.sin(E)], axis=-1)
    d = np.ascontiguousarray(d.reshape(-1, 3))
    d.setflags(write=False)
    return d


def volume_gains(configs, frustum: SensorFrustum, snap: MapSnapshot) -> np.ndarray:
    """VolumeGain for many configurations against one snapshot."""
    configs = list(configs)
    if not configs:
        return np.zeros(0, dtype=np.int64)
    r = snap.resolution
    origins = np.array([snap.to_voxel_coords(frustum.origin(c)) for c in configs])
    headings = np.array([c.heading for c in configs], dtype=float)
    idx, t = K.buffer_for(frustum.max_range / r)
    base = snap.take_stamps(len(configs))
    return K.volume_gains(snap.state, origins, headings, frustum.directions(),
                          frustum.max_range / r, frustum.fov_h / 2, frustum.fov_v / 2,
                          frustum.full_circle, snap._stamp, base, idx, t)


def volume_gain(cfg: RobotConfig, frustum: SensorFrustum, snap: MapSnapshot) -> int:
    """Number of distinct Unknown voxels inside the frustum reachable by rays from cfg.

    Rays pass through Unknown and Free voxels and stop at the first Occupied
    voxel or at the maximum range.
    """
    return int(volume_gains([cfg], frustum, snap)[0])


@dataclass
class Scan:
    origin: np.ndarray
    directions: np.ndarray
    ranges: np.ndarray
    hits: np.ndarray
    max_range: float


def simulate_scan(pose: RobotConfig, frustum: SensorFrustum, free_boxes: np.ndarray,
                  noise_sigma: float = 0.0, rng: np.random.Generator | None = None) -> Scan:
    """Range returns against analytic free-space boxes (everything else is solid).

    ``free_boxes`` is an (N, 6) array of [lo, hi] rows. With ``noise_sigma > 0``
    hit ranges get additive Gaussian noise from ``rng``.
    """
    o = frustum.origin(pose)
    dirs = frustum.world_directions(pose.heading)
    ranges, hits = K.scan_free_boxes(np.asarray(free_boxes, dtype=float), o, dirs,
                                     frustum.max_range)
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noisy scans need an rng")
        noisy = ranges + rng.normal(0.0, noise_sigma, size=ranges.shape)
        ranges = np.where(hits, np.clip(noisy, 0.0, frustum.max_range), ranges)
    return Scan(o, dirs, ranges, hits, frustum.max_range)
