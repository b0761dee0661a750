"""Dynamic time warping between 3D polylines and single-linkage path clustering."""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .graph import cumulative_lengths

RESAMPLE_SPACING = 0.5


def resample(points, spacing: float = RESAMPLE_SPACING) -> np.ndarray:
    """Points every ``spacing`` metres of arc length, always keeping both ends."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(p) < 2:
        return p.copy()
    s = cumulative_lengths(p)
    total = s[-1]
    if total == 0.0:
        return p[:1].copy()
    stations = np.arange(0.0, total, spacing)
    if total - stations[-1] > 1e-9:
        stations = np.append(stations, total)
    return np.column_stack([np.interp(stations, s, p[:, k]) for k in range(3)])


def dtw_distance(a, b) -> float:
    """Mean matched-pair distance along the optimal DTW alignment (metres)."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        return float("inf")
    total, steps = K.dtw(a, b)
    return float(total / steps)


def path_similarity(points_a, points_b, spacing: float = RESAMPLE_SPACING) -> float:
    return dtw_distance(resample(points_a, spacing), resample(points_b, spacing))


def pairwise_similarity(paths, spacing: float = RESAMPLE_SPACING) -> np.ndarray:
    """Symmetric matrix of :func:`path_similarity` over a list of polylines."""
    seqs = [resample(p, spacing) for p in paths]
    if not seqs:
        return np.zeros((0, 0))
    offsets = np.concatenate([[0], np.cumsum([len(s) for s in seqs])]).astype(np.int64)
    return K.pairwise_dtw(np.ascontiguousarray(np.vstack(seqs)), offsets)


def straight_reference(root, direction, length: float) -> np.ndarray:
    """Pseudo-straight path of the given length from root along direction."""
    root = np.asarray(root, dtype=float)
    return np.array([root, root + np.asarray(direction, dtype=float) * length])


def cluster_single_linkage(dist: np.ndarray, threshold: float) -> list[list[int]]:
    """Connected components of the graph linking items with distance <= threshold."""
    n = len(dist)
    label = list(range(n))

    def find(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if dist[i, j] <= threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    label[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [groups[k] for k in sorted(groups)]
