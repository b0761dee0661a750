import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxplore import _kernels as K
from voxplore.voxel_map import (Box, MapSnapshot, RobotConfig, VoxelMap, VoxelState,
                                sweep_placements, wrap_angle)


def dense_walk(p, d, tlim, shape, step=1e-4):
    """Voxels met by sampling the ray densely (oracle for the DDA walk)."""
    out = []
    for t in np.arange(0.0, tlim + step, step):
        q = p + d * t
        idx = tuple(int(v) for v in np.floor(q))
        if not all(0 <= i < n for i, n in zip(idx, shape)):
            break
        if not out or out[-1] != idx:
            out.append(idx)
    return out


def dda_walk(p, d, tlim, shape):
    idx, t = K.buffer_for(tlim)
    n = K.traverse(p[0], p[1], p[2], d[0], d[1], d[2], tlim, *shape, idx, t)
    return [tuple(int(v) for v in idx[i]) for i in range(abs(n))]


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


@pytest.mark.parametrize("seed", range(12))
def test_dda_matches_dense_sampling(seed):
    rng = np.random.default_rng(seed)
    shape = (16, 16, 16)
    p = rng.uniform(4.0, 12.0, 3)
    d = unit(rng.normal(size=3))
    tlim = float(rng.uniform(2.0, 7.0))
    walk = dda_walk(p, d, tlim, shape)
    ref = dense_walk(p, d, tlim, shape)
    # dense sampling may clip a corner the DDA visits for a vanishing length;
    # every sampled voxel must be visited, in order
    it = iter(walk)
    assert all(any(v == w for w in it) for v in ref)
    assert walk[0] == ref[0]
    assert len(walk) - len(ref) <= 2


def test_dda_axis_aligned_and_exit():
    shape = (10, 4, 4)
    walk = dda_walk(np.array([0.5, 1.5, 1.5]), np.array([1.0, 0.0, 0.0]), 20.0, shape)
    assert walk == [(i, 1, 1) for i in range(10)]
    idx, t = K.buffer_for(20.0)
    assert K.traverse(0.5, 1.5, 1.5, 1.0, 0.0, 0.0, 20.0, *shape, idx, t) < 0
    assert K.traverse(-1.0, 1.5, 1.5, 1.0, 0.0, 0.0, 20.0, *shape, idx, t) == 0


def make_map(n=20, res=0.2):
    return VoxelMap((0.0, 0.0, 0.0), res, (n, n, n))


def test_integrate_scan_marks_free_and_hit():
    m = make_map()
    o = np.array([0.1, 2.0, 2.0])
    m.integrate_scan(o, np.array([[1.0, 0.0, 0.0]]), np.array([2.0]), np.array([True]), 5.0)
    assert m.classify((2.05, 2.0, 2.0)) == VoxelState.OCCUPIED
    for x in np.arange(0.1, 1.95, 0.2):
        assert m.classify((x, 2.0, 2.0)) == VoxelState.FREE
    assert m.classify((2.5, 2.0, 2.0)) == VoxelState.UNKNOWN
    assert m.count(VoxelState.OCCUPIED) == 1


def test_max_range_ray_carves_without_hit():
    m = make_map()
    m.integrate_scan((0.1, 2.0, 2.0), [[1.0, 0.0, 0.0]], [1.0], [False], 1.0)
    assert m.count(VoxelState.OCCUPIED) == 0
    assert m.classify((0.9, 2.0, 2.0)) == VoxelState.FREE
    assert m.classify((1.3, 2.0, 2.0)) == VoxelState.UNKNOWN


def test_occupied_wins_within_and_across_scans():
    m = make_map()
    o = (0.1, 2.0, 2.0)
    # one ray hits at 1.0 m, another passes through the same voxel
    m.integrate_scan(o, [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]], [1.0, 3.0], [True, True], 5.0)
    assert m.classify((1.05, 2.0, 2.0)) == VoxelState.OCCUPIED
    m.integrate_scan(o, [[1.0, 0.0, 0.0]], [3.0], [True], 5.0)
    assert m.classify((1.05, 2.0, 2.0)) == VoxelState.OCCUPIED


def test_out_of_grid_is_unknown():
    m = make_map()
    assert m.classify((-1.0, 0.0, 0.0)) == VoxelState.UNKNOWN
    assert m.classify((100.0, 0.0, 0.0)) == VoxelState.UNKNOWN


def brute_box_ok(state, origin, res, fences, center, half):
    """Per-voxel positive-measure overlap test (oracle for the summed-volume query).

    Overlaps thinner than 1e-9 voxel are treated as touching (float round-off).
    """
    eps = 1e-9 * res
    lo = np.asarray(center) - half
    hi = np.asarray(center) + half
    for f in fences:
        if np.all(lo < f.hi) and np.all(hi > f.lo):
            return False
    glo = origin
    ghi = origin + np.array(state.shape) * res
    if np.any(lo < glo - eps) or np.any(hi > ghi + eps):
        return False
    n = state.shape
    for i in range(n[0]):
        x0, x1 = origin[0] + i * res, origin[0] + (i + 1) * res
        if not (x0 < hi[0] - eps and x1 > lo[0] + eps):
            continue
        for j in range(n[1]):
            y0, y1 = origin[1] + j * res, origin[1] + (j + 1) * res
            if not (y0 < hi[1] - eps and y1 > lo[1] + eps):
                continue
            for k in range(n[2]):
                z0, z1 = origin[2] + k * res, origin[2] + (k + 1) * res
                if z0 < hi[2] - eps and z1 > lo[2] + eps and state[i, j, k] != VoxelState.FREE:
                    return False
    return True


@pytest.mark.parametrize("seed", range(6))
def test_box_admissibility_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    m = VoxelMap((0.0, 0.0, 0.0), 0.2, (12, 12, 12))
    m.state[:] = VoxelState.FREE
    m.state[rng.random(m.state.shape) < 0.03] = VoxelState.OCCUPIED
    m.state[rng.random(m.state.shape) < 0.02] = VoxelState.UNKNOWN
    m.add_geofence(Box((1.0, 1.0, 1.0), (1.4, 1.4, 1.4)))
    snap = m.snapshot()
    half = np.array([0.3, 0.25, 0.2])
    pts = rng.uniform(0.0, 2.4, size=(150, 3))
    # include boxes that touch voxel faces exactly
    pts[:20] = np.round(pts[:20] / 0.2) * 0.2 + np.array([0.1, 0.05, 0.0])
    got = snap.boxes_admissible(pts, half)
    want = [brute_box_ok(m.state, m.origin, 0.2, m.geofences, p, half) for p in pts]
    assert got.tolist() == want


def test_touching_faces_is_not_overlap():
    m = VoxelMap((0.0, 0.0, 0.0), 0.2, (10, 10, 10))
    m.state[:] = VoxelState.FREE
    m.state[5, :, :] = VoxelState.OCCUPIED  # x in [1.0, 1.2)
    snap = m.snapshot()
    half = (0.2, 0.2, 0.2)
    assert snap.boxes_admissible([[0.8, 1.0, 1.0]], half)[0]  # box ends at x = 1.0
    assert not snap.boxes_admissible([[0.81, 1.0, 1.0]], half)[0]


def test_unknown_blocks_and_grid_edge_blocks():
    m = VoxelMap((0.0, 0.0, 0.0), 0.2, (10, 10, 10))
    snap = m.snapshot()
    assert not snap.config_admissible(RobotConfig(1.0, 1.0, 1.0))
    m.state[:] = VoxelState.FREE
    snap = m.snapshot()
    assert snap.config_admissible(RobotConfig(1.0, 1.0, 1.0))
    assert not snap.config_admissible(RobotConfig(0.1, 1.0, 1.0))


def brute_segment_ok(snap, a, b, half):
    pts = sweep_placements(a, b, snap.resolution)
    return bool(np.all(snap.boxes_admissible(pts, half)))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.4, 3.6), min_size=6, max_size=6), st.integers(0, 10_000))
def test_segment_admissibility_symmetric_and_matches_sweep(coords, seed):
    rng = np.random.default_rng(seed)
    m = VoxelMap((0.0, 0.0, 0.0), 0.2, (20, 20, 20))
    m.state[:] = VoxelState.FREE
    m.state[rng.random(m.state.shape) < 0.01] = VoxelState.OCCUPIED
    snap = m.snapshot()
    a, b = np.array(coords[:3]), np.array(coords[3:])
    half = np.array([0.3, 0.3, 0.3])
    ab = snap.segment_admissible(a, b, half)
    ba = snap.segment_admissible(b, a, half)
    assert ab == ba
    assert ab == brute_segment_ok(snap, a, b, half)


def test_sweep_spacing_at_most_half_voxel():
    pts = sweep_placements((0, 0, 0), (1.03, 0.2, 0.0), 0.2)
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    assert gaps.max() <= 0.1 + 1e-12
    assert np.allclose(pts[0], 0) and np.allclose(pts[-1], (1.03, 0.2, 0.0))


def test_geofence_makes_path_inadmissible_and_is_monotone():
    m = VoxelMap((0.0, 0.0, 0.0), 0.2, (20, 10, 10))
    m.state[:] = VoxelState.FREE
    a, b = (0.5, 1.0, 1.0), (3.5, 1.0, 1.0)
    assert m.snapshot().segment_admissible(a, b, (0.3, 0.3, 0.3))
    m.add_geofence(Box((1.8, 0.0, 0.0), (2.2, 2.0, 2.0)))
    m.add_geofence(Box((1.8, 0.0, 0.0), (2.2, 2.0, 2.0)))
    assert len(m.geofences) == 1
    assert not m.snapshot().segment_admissible(a, b, (0.3, 0.3, 0.3))


def test_snapshot_is_isolated_from_updates():
    m = make_map()
    snap = m.snapshot()
    m.integrate_scan((0.1, 2.0, 2.0), [[1.0, 0.0, 0.0]], [2.0], [True], 5.0)
    assert snap.classify((2.05, 2.0, 2.0)) == VoxelState.UNKNOWN
    assert not snap.state.flags.writeable
    live = MapSnapshot.live(m)
    assert live.classify((2.05, 2.0, 2.0)) == VoxelState.OCCUPIED


def test_line_of_sight_and_first_occupied():
    m = make_map()
    m.state[:] = VoxelState.FREE
    m.state[10, :, :] = VoxelState.OCCUPIED  # x in [2.0, 2.2)
    snap = m.snapshot()
    assert snap.line_of_sight((0.5, 1.0, 1.0), (1.9, 2.0, 1.0))
    assert not snap.line_of_sight((0.5, 1.0, 1.0), (3.0, 1.0, 1.0))
    t = snap.first_occupied((0.5, 1.0, 1.0), np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), 3.0)
    assert t[0] == pytest.approx(1.5)
    assert math.isinf(t[1])


def test_export_import_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    m = VoxelMap((-1.0, 0.5, 2.0), 0.2, (7, 5, 4))
    m.state[:] = rng.integers(0, 3, size=m.state.shape)
    m.add_geofence(Box((-0.5, 0.6, 2.1), (-0.1, 1.0, 2.5)))
    path = tmp_path / "map.txt"
    m.export_text(path)
    text = path.read_text().splitlines()
    assert text[0].startswith("# origin") and text[1].startswith("# resolution")
    assert all(len(line.split()) == 4 for line in text if not line.startswith("#"))
    back = VoxelMap.import_text(path)
    assert np.array_equal(back.state, m.state)
    assert np.allclose(back.origin, m.origin) and back.resolution == m.resolution
    assert back.geofences == m.geofences


def test_import_rejects_bad_lines(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("# origin 0 0 0\n# resolution 0.2\n# extents 2 2 2\n0 0 FREE\n")
    with pytest.raises(ValueError, match=":4:"):
        VoxelMap.import_text(p)


def test_covering_and_index_helpers():
    m = VoxelMap.covering(Box((-1, -3, -1), (61, 3, 4)), 0.2)
    assert m.extents == (310, 30, 25)
    idx = m.index_of((0.05, 0.05, 0.05))
    assert np.allclose(m.center_of(idx), (0.1, 0.1, 0.1))


def test_wrap_angle_range():
    for a in np.linspace(-10, 10, 101):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-12)
    assert wrap_angle(-math.pi) == math.pi
