import math

import numpy as np
import pytest

from oracles import frustum_gain_oracle
from voxplore.sensor import SensorFrustum, simulate_scan, volume_gain, volume_gains
from voxplore.voxel_map import RobotConfig, VoxelMap, VoxelState


def random_map(rng, n=32, res=0.2):
    m = VoxelMap((0.0, 0.0, 0.0), res, (n, n, n))
    s = m.state
    for _ in range(6):
        lo = rng.integers(0, n - 4, 3)
        sz = rng.integers(3, 12, 3)
        s[lo[0]:lo[0] + sz[0], lo[1]:lo[1] + sz[1], lo[2]:lo[2] + sz[2]] = VoxelState.FREE
    for _ in range(8):
        lo = rng.integers(0, n - 2, 3)
        sz = rng.integers(1, 5, 3)
        s[lo[0]:lo[0] + sz[0], lo[1]:lo[1] + sz[1], lo[2]:lo[2] + sz[2]] = VoxelState.OCCUPIED
    return m


def random_pose(rng, m):
    while True:
        p = rng.uniform(1.0, 5.4, 3)
        if m.classify(p) != VoxelState.OCCUPIED:
            return RobotConfig(*p, rng.uniform(-math.pi, math.pi))


@pytest.mark.parametrize("seed", range(5))
def test_gain_close_to_exhaustive_frustum_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    m = random_map(rng)
    cfg = random_pose(rng, m)
    fr = SensorFrustum(3.0, math.radians(120), math.radians(60), math.radians(1.0))
    snap = m.snapshot()
    got = volume_gain(cfg, fr, snap)
    want = frustum_gain_oracle(snap.state, snap.to_voxel_coords(cfg.position), cfg.heading,
                               3.0 / 0.2, fr.fov_h, fr.fov_v)
    assert abs(got - want) <= 0.05 * want


def test_gain_zero_on_fully_known_map():
    rng = np.random.default_rng(0)
    m = random_map(rng)
    m.state[m.state == VoxelState.UNKNOWN] = VoxelState.FREE
    snap = m.snapshot()
    fr = SensorFrustum(5.0, 2 * math.pi, math.pi, math.radians(2))
    cfgs = [random_pose(rng, m) for _ in range(5)]
    assert volume_gains(cfgs, fr, snap).tolist() == [0] * 5


def test_gain_of_unknown_sphere_matches_ball_volume():
    # an all-unknown map seen by a full sphere counts the voxels in the ball
    m = VoxelMap((0.0, 0.0, 0.0), 0.2, (40, 40, 40))
    snap = m.snapshot()
    fr = SensorFrustum(2.0, 2 * math.pi, math.pi, math.radians(0.5))
    g = volume_gain(RobotConfig(4.0, 4.0, 4.0), fr, snap)
    idx = np.indices((40, 40, 40)).reshape(3, -1).T + 0.5
    ball = int(np.sum(np.linalg.norm(idx - 20.0, axis=1) <= 10.0))
    assert abs(g - ball) <= 0.01 * ball


def test_occupied_shell_blocks_gain():
    m = VoxelMap((0.0, 0.0, 0.0), 0.2, (30, 30, 30))
    m.state[:] = VoxelState.OCCUPIED
    m.state[13:17, 13:17, 13:17] = VoxelState.FREE
    snap = m.snapshot()
    fr = SensorFrustum(5.0, 2 * math.pi, math.pi, math.radians(2))
    assert volume_gain(RobotConfig(3.0, 3.0, 3.0), fr, snap) == 0


def test_heading_rotates_narrow_frustum():
    m = VoxelMap((0.0, 0.0, 0.0), 0.2, (40, 40, 10))
    m.state[:, :20, :] = VoxelState.FREE  # y < 4 known, y > 4 unknown
    snap = m.snapshot()
    fr = SensorFrustum(3.0, math.radians(60), math.radians(20), math.radians(1))
    toward = volume_gain(RobotConfig(4.0, 3.5, 1.0, math.pi / 2), fr, snap)
    away = volume_gain(RobotConfig(4.0, 3.5, 1.0, -math.pi / 2), fr, snap)
    assert toward > 0 and away == 0


def test_scan_ranges_match_analytic_walls():
    fr = SensorFrustum(10.0, 2 * math.pi, math.radians(60), math.radians(5))
    box = np.array([[0.0, -2.0, 0.0, 60.0, 2.0, 3.0]])
    pose = RobotConfig(5.0, 0.0, 1.5)
    scan = simulate_scan(pose, fr, box)
    o = scan.origin
    for d, r, hit in zip(scan.directions, scan.ranges, scan.hits):
        ts = []
        for ax in range(3):
            if d[ax] > 0:
                ts.append((box[0, ax + 3] - o[ax]) / d[ax])
            elif d[ax] < 0:
                ts.append((box[0, ax] - o[ax]) / d[ax])
        exit_t = min(ts)
        if exit_t < 10.0:
            assert hit and r == pytest.approx(exit_t, abs=1e-9)
        else:
            assert not hit and r == 10.0


def test_scan_through_union_of_boxes():
    fr = SensorFrustum(20.0, 2 * math.pi, math.pi, math.pi / 2)
    boxes = np.array([[0, 0, 0, 4, 2, 2], [4, 0, 0, 8, 2, 2]], dtype=float)
    scan = simulate_scan(RobotConfig(1.0, 1.0, 1.0), fr, boxes)
    ahead = int(np.argmax(scan.directions[:, 0]))
    assert scan.ranges[ahead] == pytest.approx(7.0)


def test_noisy_scan_requires_rng_and_is_seeded():
    fr = SensorFrustum(5.0)
    box = np.array([[0.0, -2.0, 0.0, 60.0, 2.0, 3.0]])
    pose = RobotConfig(5.0, 0.0, 1.5)
    with pytest.raises(ValueError):
        simulate_scan(pose, fr, box, noise_sigma=0.1)
    a = simulate_scan(pose, fr, box, 0.1, np.random.default_rng(4))
    b = simulate_scan(pose, fr, box, 0.1, np.random.default_rng(4))
    assert np.array_equal(a.ranges, b.ranges)


def test_frustum_validation():
    with pytest.raises(ValueError):
        SensorFrustum(fov_v=4.0)
    with pytest.raises(ValueError):
        SensorFrustum(max_range=0.0)
    d = SensorFrustum(step=math.radians(2)).directions()
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
    assert len(d) == 180 * 16
