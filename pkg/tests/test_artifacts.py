import math

import numpy as np
import pytest

from oracles import sigmoid
from voxplore.artifacts import (RANGE_ONLY, Artifact, ArtifactClass, ArtifactParams,
                                ArtifactTracker, Camera, Detection, DetectorParams, NoSurfaceHit,
                                Report, associate_and_update, bbox_to_point, confirm_and_freeze,
                                score_report, simulate_detection)
from voxplore.voxel_map import RobotConfig, VoxelMap, VoxelState

S = ArtifactClass.SURVIVOR


@pytest.mark.parametrize("p_hit,p_miss", [(0.7, 0.3), (0.9, 0.4), (0.55, 0.45)])
def test_posterior_after_n_hits_is_closed_form(p_hit, p_miss):
    hyps = []
    for n in range(1, 11):
        h = associate_and_update((1.0, 2.0, 3.0), S, hyps, 1.0, p_hit, p_miss)
        want = sigmoid(n * math.log(p_hit / p_miss))
        assert h.probability(S) == pytest.approx(want, rel=1e-9)
    assert len(hyps) == 1 and h.count == 10


def test_running_mean_center_and_new_hypothesis():
    hyps = []
    associate_and_update((0.0, 0.0, 0.0), S, hyps, 1.0)
    h = associate_and_update((0.2, 0.0, 0.0), S, hyps, 1.0)
    assert np.allclose(h.center, (0.1, 0.0, 0.0))
    associate_and_update((0.4, 0.0, 0.0), S, hyps, 1.0)
    assert np.allclose(hyps[0].center, (0.2, 0.0, 0.0))
    far = associate_and_update((5.0, 0.0, 0.0), S, hyps, 1.0)
    assert far.id == 1 and len(hyps) == 2
    with pytest.raises(ValueError):
        associate_and_update((np.nan, 0, 0), S, hyps, 1.0)


def test_freeze_blocks_updates_and_duplicate_reports():
    hyps = []
    for _ in range(2):
        h = associate_and_update((0.0, 0.0, 0.0), S, hyps, 1.0)
        assert confirm_and_freeze(h, 0.9) is None  # sigma(2 ln 7/3) = 0.845
    h = associate_and_update((0.0, 0.0, 0.0), S, hyps, 1.0)
    rep = confirm_and_freeze(h, 0.9, t=4.0)
    assert rep is not None and rep.cls == S and rep.t == 4.0 and h.frozen
    before = (h.center.copy(), dict(h.log_odds), h.count)
    assert associate_and_update((0.3, 0.0, 0.0), S, hyps, 1.0) is None
    assert np.array_equal(h.center, before[0]) and h.log_odds == before[1]
    assert confirm_and_freeze(h, 0.9) is None


def test_argmax_class_reported():
    hyps = []
    for cls in [S, ArtifactClass.DRILL, ArtifactClass.DRILL, ArtifactClass.DRILL]:
        h = associate_and_update((0.0, 0.0, 0.0), cls, hyps, 1.0)
    rep = confirm_and_freeze(h, 0.9)
    assert rep.cls == ArtifactClass.DRILL


def test_scoring_rule():
    arts = [Artifact("a", S, (0.0, 0.0, 0.0)), Artifact("b", ArtifactClass.DRILL, (3.0, 0, 0))]
    consumed: set[str] = set()
    r1 = Report(S, (4.0, 0.0, 0.0), 0)
    assert score_report(r1, arts, consumed) and r1.error == pytest.approx(4.0)
    assert r1.artifact_id == "a" and r1.to_record()["artifact_id"] == "a"
    r2 = Report(S, (0.5, 0.0, 0.0), 1)  # same artifact again: already consumed
    assert not score_report(r2, arts, consumed)
    r3 = Report(ArtifactClass.DRILL, (9.0, 0.0, 0.0), 2)  # 6 m away
    assert not score_report(r3, arts, consumed) and r3.error == pytest.approx(6.0)
    r4 = Report(ArtifactClass.VENT, (0.0, 0.0, 0.0), 3)  # wrong class
    assert not score_report(r4, arts, consumed) and r4.error is None


def wall_map():
    m = VoxelMap((0.0, 0.0, 0.0), 0.2, (50, 20, 15))
    m.state[:] = VoxelState.FREE
    m.state[40:, :, :] = VoxelState.OCCUPIED  # wall at x = 8
    return m


def test_bbox_projects_to_wall_median():
    m = wall_map()
    cam = Camera()
    pose = RobotConfig(2.0, 2.0, 1.5)
    det = Detection(0.0, pose, (0.45, 0.45, 0.55, 0.55), S, cam)
    p = bbox_to_point(det, m.snapshot())
    # plane-intersection oracle: 25 grid rays hit x = 8, take the 13th by range
    hits = []
    for i in range(5):
        for j in range(5):
            d = cam.ray(pose, 0.45 + (j + 0.5) / 5 * 0.1, 0.45 + (i + 0.5) / 5 * 0.1)
            t = (8.0 - 2.0) / d[0]
            hits.append((t, pose.position + t * d))
    hits.sort(key=lambda h: h[0])
    assert np.allclose(p, hits[12][1], atol=1e-9)


def test_bbox_errors():
    m = VoxelMap((0.0, 0.0, 0.0), 0.2, (20, 20, 20))
    m.state[:] = VoxelState.FREE
    det = Detection(0.0, RobotConfig(2, 2, 2), (0.4, 0.4, 0.6, 0.6), S, Camera())
    with pytest.raises(NoSurfaceHit):
        bbox_to_point(det, m.snapshot(), max_range=1.0)
    with pytest.raises(ValueError):
        bbox_to_point(Detection(0.0, RobotConfig(2, 2, 2), (0, 0, 1, 1), S), m.snapshot())
    with pytest.raises(ValueError):
        Detection(0.0, RobotConfig(2, 2, 2), (0.5, 0, 0.4, 1), S)


def test_camera_projection_roundtrip():
    cam = Camera(yaw=0.3, offset=(0.1, 0.0, 0.2))
    pose = RobotConfig(1.0, 2.0, 1.0, 0.7)
    target = np.array([5.0, 5.0, 1.4])
    u, v, depth = cam.project(pose, target)
    o = cam.frame(pose)[0]
    d = cam.ray(pose, u, v)
    assert np.allclose(o + d * np.linalg.norm(target - o), target)
    assert cam.project(pose, pose.position - 5 * cam.frame(pose)[1]) is None


def test_detection_visibility_and_occlusion():
    m = wall_map()
    snap = m.snapshot()
    art = [Artifact("s", S, (7.9, 2.0, 1.5)), Artifact("p", ArtifactClass.CELL_PHONE, (3.0, 2, 1))]
    params = DetectorParams()
    rng = np.random.default_rng(0)
    dets = simulate_detection(0.0, RobotConfig(2.0, 2.0, 1.5), [Camera()], art, snap, params, rng)
    assert sorted(d.artifact_id for d in dets) == ["p", "s"]
    phone = [d for d in dets if d.artifact_id == "p"][0]
    assert phone.camera is None and phone.cls in RANGE_ONLY
    # looking away: no visual detection, phone still within range
    dets = simulate_detection(0.0, RobotConfig(2.0, 2.0, 1.5, math.pi), [Camera()], art, snap,
                              params, rng)
    assert [d.artifact_id for d in dets] == ["p"]
    # occluding slab between robot and artifact
    m.state[25, :, :] = VoxelState.OCCUPIED
    dets = simulate_detection(0.0, RobotConfig(2.0, 2.0, 1.5), [Camera()], art[:1],
                              m.snapshot(), params, rng)
    assert dets == []


def test_tracker_confirms_after_three_hits_and_separates_range_only():
    tr = ArtifactTracker(ArtifactParams())
    reps = [tr.process((1.0, 1.0, 1.0), S, float(t)) for t in range(3)]
    assert reps[:2] == [None, None] and reps[2].hypothesis_id == 0
    phone = ArtifactClass.CELL_PHONE
    reps = [tr.process((1.0 + 0.8 * k, 1.0, 1.0), phone, 5.0 + k) for k in range(3)]
    assert reps[2] is not None and reps[2].cls == phone and reps[2].hypothesis_id == 1
    assert [h.id for h in tr.hypotheses] == [0, 1]
    assert len(tr.reports) == 2
