import math

import numpy as np
import pytest

from oracles import dtw_reference
from voxplore.dtw import resample, straight_reference
from voxplore.graph import PathKind, PlannedPath
from voxplore.local_planner import (DegenerateRoot, GainParams, LocalParams, assign_headings,
                                    build_local_graph, exploration_gain, plan_local, select_best,
                                    similarity_to_direction)
from voxplore.sensor import SensorFrustum
from voxplore.voxel_map import LocalBound, RobotConfig, VoxelMap, VoxelState


def corridor_map(known_to=6.0):
    """20 x 4 x 3 m corridor, free up to ``known_to`` metres along x, unknown beyond."""
    m = VoxelMap((-1.0, -3.0, -1.0), 0.2, (110, 30, 25))
    m.state[:] = VoxelState.OCCUPIED
    lo = m.index_of((0.0, -2.0, 0.0))
    hi = m.index_of((known_to, 2.0, 3.0))
    far = m.index_of((20.0, 2.0, 3.0))
    m.state[lo[0]:far[0], lo[1]:hi[1], lo[2]:hi[2]] = VoxelState.UNKNOWN
    m.state[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = VoxelState.FREE
    return m


def test_local_gain_closed_form():
    p = GainParams(zeta=0.3, delta_gain=0.15, direction=(1.0, 0.0, 0.0))
    pts = np.array([[0.0, 0.0, 0.0], [2.0, 1.0, 0.0], [4.0, 3.0, 0.0]])
    g1, g2 = 40.0, 70.0
    got = exploration_gain(pts[[0, 1]], [g1, g2], p)
    d = math.hypot(2.0, 1.0)
    ref = straight_reference(pts[0], (1.0, 0.0, 0.0), d)
    total, steps = dtw_reference(resample(pts[[0, 1]]), resample(ref))
    z = total / steps
    assert z > 0
    want = math.exp(-0.3 * z) * (g1 + g2 * math.exp(-0.15 * d))
    assert got == pytest.approx(want, rel=1e-9)


def test_no_direction_means_no_penalty():
    p = GainParams()
    assert similarity_to_direction([[0, 0, 0], [1, 0, 0]], (0, 0, 0)) == 0.0
    assert exploration_gain([[0, 0, 0], [1, 0, 0]], [1.0, 1.0], p) == pytest.approx(
        1.0 + math.exp(-0.15))


def test_straight_path_along_direction_has_zero_similarity():
    pts = [[0, 0, 0], [1.5, 0, 0], [3.0, 0, 0]]
    assert similarity_to_direction(pts, (1.0, 0.0, 0.0)) == pytest.approx(0.0, abs=1e-12)


def test_gain_params_validation():
    with pytest.raises(ValueError):
        GainParams(direction=(2.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        GainParams(threshold=0.0)


def test_local_graph_properties():
    m = corridor_map()
    snap = m.snapshot()
    root = RobotConfig(1.0, 0.0, 1.5)
    bound = LocalBound(tuple(root.position), (8.0, 8.0, 3.0))
    g = build_local_graph(snap, root, bound, 150, 1.0, "horizontal", np.random.default_rng(1))
    assert g.root == 0 and g.vertices[0].config == root
    assert g.reachable(0) == set(g.ids())
    box = bound.box()
    half = root.half_extents
    for vid in g.ids():
        c = g.vertices[vid].config
        assert box.contains(c.position)
        assert snap.config_admissible(c)
    for a, b, w in g.edges():
        pa, pb = g.vertices[a].config.position, g.vertices[b].config.position
        assert w == pytest.approx(np.linalg.norm(pa - pb)) and w <= 1.0 + 1e-12
        assert snap.segment_admissible(pa, pb, half)


def test_planar_sampling_keeps_root_height():
    m = corridor_map()
    root = RobotConfig(1.0, 0.0, 0.6)
    g = build_local_graph(m.snapshot(), root, LocalBound(tuple(root.position), (8, 8, 3)), 80,
                          1.0, "horizontal", np.random.default_rng(2), planar=True)
    assert np.allclose(g.positions()[:, 2], 0.6)


def test_degenerate_root_raises():
    m = corridor_map()
    with pytest.raises(DegenerateRoot):
        build_local_graph(m.snapshot(), RobotConfig(1.0, 0.0, 0.1),
                          LocalBound((1.0, 0.0, 0.1), (8, 8, 3)), 50, 1.0, "horizontal",
                          np.random.default_rng(0))


def test_plan_local_heads_into_unknown_and_is_seeded():
    m = corridor_map()
    snap = m.snapshot()
    root = RobotConfig(1.0, 0.0, 1.5)
    fr = SensorFrustum(5.0)
    local = LocalParams(bound_dims=(10.0, 10.0, 3.0), n_samples=150)
    a = plan_local(snap, root, fr, GainParams(), local, np.random.default_rng(5))
    b = plan_local(snap, root, fr, GainParams(), local, np.random.default_rng(5))
    assert not a.local_completion
    assert a.path.points[-1][0] > 3.0
    assert np.array_equal(a.path.points, b.path.points)
    assert a.path.vertex_ids[0] == a.graph.root


def test_plan_local_completion_on_known_map():
    m = corridor_map(known_to=20.0)
    res = plan_local(m.snapshot(), RobotConfig(10.0, 0.0, 1.5), SensorFrustum(5.0),
                     GainParams(), LocalParams(bound_dims=(10, 10, 3), n_samples=80),
                     np.random.default_rng(0))
    assert res.local_completion and res.path is None


def test_select_best_tie_breaks():
    c = [RobotConfig(0, 0, 0), RobotConfig(1, 0, 0), RobotConfig(2, 0, 0)]
    short = PlannedPath(c[:2], [0, 1], 5.0)
    long = PlannedPath(c, [0, 1, 2], 5.0)
    assert select_best({2: long, 1: short}) is short
    assert select_best({}) is None


def test_headings_legged_follow_segments():
    c = [RobotConfig(0, 0, 0), RobotConfig(1, 0, 0), RobotConfig(1, 1, 0), RobotConfig(1, 1, 1)]
    p = assign_headings(PlannedPath(c, [0, 1, 2, 3]), 1.0, 1.0, "legged")
    h = [cfg.heading for cfg in p.configs]
    assert h == pytest.approx([0.0, math.pi / 2, math.pi / 2, math.pi / 2])


def test_headings_aerial_rate_limited():
    c = [RobotConfig(0, 0, 0), RobotConfig(0, 0.5, 0), RobotConfig(0, 1.0, 0)]
    p = assign_headings(PlannedPath(c, [0, 1, 2]), 1.0, 1.0, "aerial")
    h = [cfg.heading for cfg in p.configs]
    assert h == pytest.approx([0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        assign_headings(PlannedPath(c), 1.0, 1.0, "wheeled")
    assert assign_headings(PlannedPath(c[:1]), 1.0, 1.0, "aerial").configs == c[:1]
    assert PlannedPath(c).kind is PathKind.LOCAL
