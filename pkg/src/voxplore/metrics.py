"""Ground-truth explorable volume and mission summary figures."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .voxel_map import Box, VoxelMap, VoxelState
from .world import World

_SIX = ndimage.generate_binary_structure(3, 1)


def truth_free(world: World, vmap: VoxelMap) -> np.ndarray:
    """Voxels whose centre lies inside some free box."""
    r = vmap.resolution
    axes = [vmap.origin[k] + (np.arange(vmap.extents[k]) + 0.5) * r for k in range(3)]
    out = np.zeros(vmap.extents, dtype=bool)
    for b in world.free_boxes:
        masks = [(a >= lo) & (a <= hi) for a, lo, hi in zip(axes, b.lo, b.hi)]
        out |= masks[0][:, None, None] & masks[1][None, :, None] & masks[2][None, None, :]
    return out


def explorable_mask(world: World, vmap: VoxelMap) -> np.ndarray:
    """Free voxels connected to the start, plus the solid shell bordering them.

    Pockets that no free voxel touches form the residual volume and are left out.
    """
    free = truth_free(world, vmap)
    labels, _ = ndimage.label(free, structure=_SIX)
    start = vmap.index_of(world.start.position)
    if not vmap.in_bounds(start) or labels[start] == 0:
        return np.zeros_like(free)
    reach = labels == labels[start]
    shell = ndimage.binary_dilation(reach, structure=_SIX) & ~free
    return reach | shell


def region_mask(vmap: VoxelMap, box: Box) -> np.ndarray:
    r = vmap.resolution
    axes = [vmap.origin[k] + (np.arange(vmap.extents[k]) + 0.5) * r for k in range(3)]
    m = [(a >= lo) & (a <= hi) for a, lo, hi in zip(axes, box.lo, box.hi)]
    return m[0][:, None, None] & m[1][None, :, None] & m[2][None, None, :]


def explored_fraction(world: World, vmap: VoxelMap, region: Box | None = None,
                      explorable: np.ndarray | None = None) -> float:
    if explorable is None:
        explorable = explorable_mask(world, vmap)
    mask = explorable if region is None else explorable & region_mask(vmap, region)
    total = int(mask.sum())
    if total == 0:
        return 0.0
    known = vmap.state != VoxelState.UNKNOWN
    return float((known & mask).sum()) / total


def compute_metrics(log, world: World, vmap: VoxelMap,
                    regions: dict[str, Box] | None = None) -> dict:
    explorable = explorable_mask(world, vmap)
    out = {
        "explored_fraction": explored_fraction(world, vmap, explorable=explorable),
        "explorable_voxels": int(explorable.sum()),
        "known_voxels": int(np.count_nonzero(vmap.state != VoxelState.UNKNOWN)),
        "score": sum(1 for r in log.reports if r.get("scored")),
        "reports": len(log.reports),
        "total_distance": float(log.ticks[-1]["distance"]) if log.ticks else 0.0,
    }
    walls = log.plan_wall
    out["planning_iterations"] = len(walls)
    out["planning_wall_mean"] = float(np.mean(walls)) if walls else 0.0
    out["planning_wall_max"] = float(np.max(walls)) if walls else 0.0
    if regions:
        out["region_fraction"] = {
            name: explored_fraction(world, vmap, box, explorable)
            for name, box in regions.items()
        }
    return out
