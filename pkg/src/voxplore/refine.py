"""Push interior path vertices away from obstacles while keeping the path admissible."""

from __future__ import annotations

import numpy as np

from .graph import PathKind, PlannedPath
from .voxel_map import MapSnapshot, VoxelState


def clearance(snap: MapSnapshot, p, radius: float) -> float:
    """Distance from p to the nearest Occupied voxel, capped at ``radius``."""
    r = snap.resolution
    pv = snap.to_voxel_coords(p)
    reach = int(np.ceil(radius / r)) + 1
    lo = np.maximum(np.floor(pv).astype(int) - reach, 0)
    hi = np.minimum(np.floor(pv).astype(int) + reach + 1, snap.extents)
    if np.any(hi <= lo):
        return radius
    block = snap.state[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    occ = np.argwhere(block == VoxelState.OCCUPIED)
    if len(occ) == 0:
        return radius
    centers = snap.origin + (occ + lo + 0.5) * r
    gap = np.maximum(np.abs(centers - np.asarray(p, dtype=float)) - r / 2, 0.0)
    return float(min(radius, np.min(np.linalg.norm(gap, axis=1))))


def clearance_gradient(snap: MapSnapshot, p, radius: float) -> np.ndarray:
    r = snap.resolution
    g = np.zeros(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = r
        g[k] = (clearance(snap, p + e, radius) - clearance(snap, p - e, radius)) / (2 * r)
    return g


def refine(path: PlannedPath, snap: MapSnapshot, target_clearance: float,
           max_iterations: int = 10, planar: bool = False) -> PlannedPath:
    """Gradient ascent on obstacle clearance for interior vertices.

    A move is kept only if it raises the vertex clearance and both adjoining
    segments stay admissible; endpoints never move.
    """
    cfgs = list(path.configs)
    if len(cfgs) < 3:
        return PlannedPath(cfgs, list(path.vertex_ids), path.gain, PathKind.REFINED)
    half = cfgs[0].half_extents
    radius = target_clearance + 2 * snap.resolution
    step = snap.resolution
    for i in range(1, len(cfgs) - 1):
        p = cfgs[i].position
        c = clearance(snap, p, radius)
        prev_p = cfgs[i - 1].position
        next_p = cfgs[i + 1].position
        moved = False
        for _ in range(max_iterations):
            if c >= target_clearance:
                break
            g = clearance_gradient(snap, p, radius)
            if planar:
                g[2] = 0.0
            n = np.linalg.norm(g)
            if n < 1e-12:
                break
            q = p + g / n * min(step, target_clearance - c + 1e-3)
            cq = clearance(snap, q, radius)
            if cq <= c:
                break
            ok = snap.segments_admissible(np.array([prev_p, q]), np.array([q, next_p]), half)
            if not np.all(ok):
                break
            p, c = q, cq
            moved = True
        if moved:
            cfgs[i] = cfgs[i].moved(p)
    return PlannedPath(cfgs, list(path.vertex_ids), path.gain, PathKind.REFINED)
