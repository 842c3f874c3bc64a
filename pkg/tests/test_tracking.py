"""Kalman filtering, Hungarian assignment, and event detection."""

import itertools

import numpy as np
import pytest

from mitosim.segmentation import LabelMap, connected_components
from mitosim.tracking import (EventRecord, KalmanState, TrackParams,
                              detections_from, hungarian, kalman_predict,
                              kalman_update, track_sequence)
from mitosim.rng import make_rng


def state(x, p=None, q=1.0, m=1.0):
    p = np.eye(4) if p is None else p
    return KalmanState(x=np.asarray(x, dtype=float), p=p, q=q, m=m)


def frame_from_rects(rects, shape=(64, 64)):
    mask = np.zeros(shape, dtype=bool)
    for y0, x0, h, w in rects:
        mask[y0:y0 + h, x0:x0 + w] = True
    return connected_components(mask)


def test_predict_moves_by_velocity():
    out = kalman_predict(state([0.0, 0.0, 1.0, 1.0], q=0.0))
    assert np.allclose(out.x, [1.0, 1.0, 1.0, 1.0], atol=0.0)
    two = kalman_predict(kalman_predict(state([0.0, 0.0, 2.0, 3.0], q=0.0)))
    assert np.allclose(two.x, [4.0, 6.0, 2.0, 3.0], atol=0.0)


def test_predict_inflates_covariance():
    s = state([0.0] * 4, q=1.0)
    out = kalman_predict(s)
    assert np.trace(out.p) > np.trace(s.p)


def test_update_hand_worked_example():
    # prior diag(1,1,10,10), one predict then update with z=(2,-1)
    s = state([0.0] * 4, p=np.diag([1.0, 1.0, 10.0, 10.0]), q=1.0, m=1.0)
    s = kalman_predict(s)
    assert np.allclose(s.p, np.array([[12, 0, 10, 0],
                                      [0, 12, 0, 10],
                                      [10, 0, 11, 0],
                                      [0, 10, 0, 11]], dtype=float), atol=0.0)
    out = kalman_update(s, (2.0, -1.0))
    assert np.allclose(out.x, [24 / 13, -12 / 13, 20 / 13, -10 / 13], atol=1e-12)
    assert np.allclose(out.p[0], [12 / 13, 0.0, 10 / 13, 0.0], atol=1e-12)
    assert np.allclose(out.p[2], [10 / 13, 0.0, 43 / 13, 0.0], atol=1e-12)
    assert np.allclose(out.p, out.p.T, atol=0.0)


def test_update_limits():
    prior = kalman_predict(state([3.0, 4.0, 0.5, -0.5],
                                 p=np.diag([2.0, 2.0, 5.0, 5.0]), m=1e12))
    post = kalman_update(prior, (100.0, 100.0))
    assert np.allclose(post.x, prior.x, atol=1e-6)  # huge m ignores z

    exact = KalmanState(x=np.array([3.0, 4.0, 0.5, -0.5]),
                        p=np.diag([2.0, 2.0, 5.0, 5.0]), q=1.0, m=0.0)
    post = kalman_update(exact, (7.0, -2.0))
    assert np.allclose(post.x[:2], [7.0, -2.0], atol=1e-9)  # m=0 trusts z


def test_update_rejects_singular_innovation():
    s = KalmanState(x=np.zeros(4), p=np.zeros((4, 4)), q=0.0, m=0.0)
    with pytest.raises(ValueError):
        kalman_update(s, (0.0, 0.0))


def test_hungarian_identity_and_forbidden():
    cost = np.ones((3, 3))
    np.fill_diagonal(cost, 0.0)
    assert hungarian(cost) == [(0, 0), (1, 1), (2, 2)]
    assert hungarian(np.array([[np.inf, 1.0], [1.0, np.inf]])) == [(0, 1), (1, 0)]
    assert hungarian(np.full((2, 2), np.inf)) == []
    assert hungarian(np.empty((0, 3))) == []


def brute_force_cost(cost):
    """Best (-pairs_used, total_cost) over every injective assignment."""
    n_rows, n_cols = cost.shape
    best = None
    for perm in itertools.permutations(range(n_cols), n_rows):
        total, used = 0.0, 0
        for r, c in enumerate(perm):
            if np.isfinite(cost[r, c]):
                total += cost[r, c]
                used += 1
        key = (-used, total)
        if best is None or key < best:
            best = key
    return best


def test_hungarian_against_permutation_oracle():
    for seed in range(200):
        rng = make_rng(seed, 0x48554E47)
        cost = rng.uniform(0.0, 10.0, size=(6, 6))
        cost[rng.uniform(size=(6, 6)) < 0.2] = np.inf
        got = hungarian(cost)
        got_key = (-len(got), sum(cost[r, c] for r, c in got))
        best = brute_force_cost(cost)
        assert got_key[0] == best[0]
        assert got_key[1] == pytest.approx(best[1], abs=1e-9)


def test_hungarian_rectangular():
    cost = np.array([[5.0, 1.0, 9.0],
                     [1.0, 8.0, 2.0]])
    got = dict(hungarian(cost))
    assert got == {0: 1, 1: 0}


def test_detections_from_hand_map():
    comps = frame_from_rects([(10, 10, 5, 5), (40, 30, 2, 10)])
    dets = detections_from(comps, frame=3)
    assert [d.component_id for d in dets] == [1, 2]
    assert dets[0].centroid == (12.0, 12.0)
    assert dets[0].area == 25
    assert dets[0].bbox == (10, 10, 14, 14)
    assert dets[1].centroid == (34.5, 40.5)
    assert dets[1].area == 20
    assert all(d.frame == 3 for d in dets)


def test_two_stationary_blobs_stay_two_tracks():
    frames = [frame_from_rects([(10, 10, 5, 5), (48, 48, 5, 5)])
              for _ in range(10)]
    tracks, events = track_sequence(frames)
    assert len(tracks) == 2
    assert events == []
    for t, cx in zip(tracks, (12.0, 50.0)):
        assert len(t.points) == 10
        assert all(p.status == "active" for p in t.points)
        assert all(abs(p.x - cx) < 1e-9 for p in t.points)


def test_dropped_frame_is_bridged():
    def blob_at(x):
        return frame_from_rects([(20, x, 5, 5)])

    frames = [blob_at(5), blob_at(7), blob_at(9), frame_from_rects([]),
              blob_at(13), blob_at(15)]
    tracks, events = track_sequence(frames)
    assert len(tracks) == 1
    assert events == []
    statuses = [p.status for p in tracks[0].points]
    assert statuses == ["active"] * 3 + ["lost"] + ["active"] * 2


def test_track_expires_after_max_miss():
    frames = ([frame_from_rects([(20, 20, 5, 5)])] * 2
              + [frame_from_rects([])] * 3
              + [frame_from_rects([(20, 20, 5, 5)])])
    tracks, events = track_sequence(frames)
    assert len(tracks) == 2
    assert tracks[0].status == "ended"
    assert [p.status for p in tracks[0].points] == ["active", "active",
                                                    "lost", "lost"]
    assert tracks[1].points[0].frame == 5


def test_fusion_event():
    apart = frame_from_rects([(10, 10, 5, 5), (10, 30, 5, 5)])
    merged = frame_from_rects([(10, 10, 5, 25)])
    tracks, events = track_sequence([apart, merged])
    assert len(events) == 1
    ev = events[0]
    assert ev.type == "fusion"
    assert ev.frame == 1
    assert ev.sources == (1, 2)
    assert len(ev.sinks) == 1 and ev.sinks[0] in (1, 2)
    ended = [t for t in tracks if t.status == "ended"]
    assert len(ended) == 1


def test_fission_event():
    whole = frame_from_rects([(10, 10, 5, 10)])
    halves = frame_from_rects([(10, 5, 5, 5), (10, 20, 5, 5)])
    tracks, events = track_sequence([whole, halves])
    assert len(events) == 1
    ev = events[0]
    assert ev.type == "fission"
    assert ev.frame == 1
    assert ev.sources == (1,)
    assert ev.sinks == (1, 2)
    assert len(tracks) == 2


def test_persistent_merge_fires_once():
    apart = frame_from_rects([(10, 10, 5, 5), (10, 30, 5, 5)])
    merged = frame_from_rects([(10, 10, 5, 25)])
    _, events = track_sequence([apart, merged, merged, merged])
    assert [e.type for e in events] == ["fusion"]


def test_iou_metric_matches_euclidean_on_still_scene():
    frames = [frame_from_rects([(10, 10, 6, 6), (40, 40, 6, 6)])
              for _ in range(4)]
    tracks_iou, ev_iou = track_sequence(frames, TrackParams(cost_metric="iou"))
    assert len(tracks_iou) == 2
    assert ev_iou == []


def test_track_sequence_input_validation():
    with pytest.raises(ValueError):
        track_sequence([frame_from_rects([(1, 1, 2, 2)])])
    with pytest.raises(ValueError):
        TrackParams(gate=0.0).validate()
    with pytest.raises(ValueError):
        TrackParams(max_miss=-1).validate()
    with pytest.raises(ValueError):
        TrackParams(area_ratio=1.5).validate()
    with pytest.raises(ValueError):
        TrackParams(cost_metric="overlap").validate()
