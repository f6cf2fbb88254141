import numpy as np
import pytest

from motrack.geometry import BBox
from motrack.gmc import AffineWarp
from motrack.metrics import evaluate
from motrack.mot_io import eval_frames
from motrack.tracker import (
    Detection,
    Tracker,
    TrackerConfig,
    TrackState,
    split_detections,
    update_appearance,
)
from scenes import crossing_scene, panning_scene


def det(x, y, w, h, score, emb=None):
    return Detection(BBox(x, y, w, h), score, emb)


def run_scene(dets, cfg, warps=None):
    tracker = Tracker(cfg)
    out = {}
    for k in sorted(dets):
        warp = warps[k] if warps else None
        out[k] = tracker.step(k, dets[k], warp)
    return out


def outputs_to_pred_frames(outputs):
    return {k: [(tid, box) for tid, box, _ in rows] for k, rows in outputs.items()}


# --- split / appearance ------------------------------------------------------


def test_split_detections():
    dets = [det(0, 0, 1, 1, s) for s in (0.9, 0.4, 0.05)]
    high, low = split_detections(dets, 0.6, 0.1)
    assert [d.score for d in high] == [0.9]
    assert [d.score for d in low] == [0.4]


def test_split_all_high():
    dets = [det(0, 0, 1, 1, s) for s in (0.7, 0.8)]
    high, low = split_detections(dets, 0.6, 0.1)
    assert len(high) == 2 and low == []


def test_split_empty():
    assert split_detections([], 0.6, 0.1) == ([], [])


def test_update_appearance_first_observation():
    f = np.array([0.6, 0.8])
    np.testing.assert_array_equal(update_appearance(None, f, 0.9), f)


def test_update_appearance_fixed_point():
    f = np.array([0.6, 0.8])
    np.testing.assert_allclose(update_appearance(f, f, 0.9), f)


def test_update_appearance_mix():
    e = np.array([1.0, 0.0])
    f = np.array([0.0, 1.0])
    out = update_appearance(e, f, 0.9)
    np.testing.assert_allclose(out, [0.99388373, 0.11043153], atol=1e-6)
    assert np.linalg.norm(out) == pytest.approx(1.0)


def test_update_appearance_antipodal_keeps_previous():
    e = np.array([1.0, 0.0])
    out = update_appearance(e, -e, 0.5)
    np.testing.assert_array_equal(out, e)


# --- basic stepping -----------------------------------------------------------


def test_first_frame_activates_track():
    tracker = Tracker(TrackerConfig())
    out = tracker.step(1, [det(10, 10, 40, 80, 0.9)])
    assert len(out) == 1
    tid, box, score = out[0]
    assert tid == 1 and score == 0.9
    assert box.w == pytest.approx(40) and box.h == pytest.approx(80)


def test_same_box_keeps_id():
    tracker = Tracker(TrackerConfig())
    out1 = tracker.step(1, [det(10, 10, 40, 80, 0.9)])
    out2 = tracker.step(2, [det(10, 10, 40, 80, 0.9)])
    assert out1[0][0] == out2[0][0] == 1


def test_low_score_detection_spawns_nothing():
    tracker = Tracker(TrackerConfig())
    out = tracker.step(1, [det(10, 10, 40, 80, 0.5)])
    assert out == []
    assert tracker.tracked == [] and tracker.unconfirmed == []


def test_new_track_needs_confirmation_after_first_frame():
    tracker = Tracker(TrackerConfig())
    tracker.step(1, [det(10, 10, 40, 80, 0.9)])
    out2 = tracker.step(2, [det(10, 10, 40, 80, 0.9), det(500, 500, 40, 80, 0.9)])
    assert [tid for tid, _, _ in out2] == [1]  # newcomer unconfirmed
    out3 = tracker.step(3, [det(10, 10, 40, 80, 0.9), det(500, 500, 40, 80, 0.9)])
    assert [tid for tid, _, _ in out3] == [1, 2]


def test_second_association_recovers_low_score():
    tracker = Tracker(TrackerConfig())
    tracker.step(1, [det(10, 10, 40, 80, 0.9)])
    out = tracker.step(2, [det(10, 10, 40, 80, 0.3)])
    assert [tid for tid, _, _ in out] == [1]


def test_ids_monotone_and_never_reused():
    tracker = Tracker(TrackerConfig(track_buffer=2))
    tracker.step(1, [det(10, 10, 40, 80, 0.9)])
    for k in range(2, 7):
        tracker.step(k, [])
    out = tracker.step(7, [det(10, 10, 40, 80, 0.9)])
    assert out == []  # new unconfirmed track, old one removed
    out = tracker.step(8, [det(10, 10, 40, 80, 0.9)])
    assert [tid for tid, _, _ in out] == [2]


def test_track_rebirth_within_buffer():
    tracker = Tracker(TrackerConfig(track_buffer=30))
    tracker.step(1, [det(10, 10, 40, 80, 0.9)])
    for k in range(2, 10):
        tracker.step(k, [])
    out = tracker.step(10, [det(10, 10, 40, 80, 0.9)])
    assert [tid for tid, _, _ in out] == [1]


def test_frame_index_must_advance_by_one():
    tracker = Tracker(TrackerConfig())
    tracker.step(1, [])
    with pytest.raises(ValueError):
        tracker.step(3, [])


def test_output_pred_emits_one_extrapolated_frame():
    cfg = TrackerConfig(output_pred=True)
    tracker = Tracker(cfg)
    tracker.step(1, [det(100, 100, 40, 80, 0.9)])
    tracker.step(2, [det(110, 100, 40, 80, 0.9)])
    out3 = tracker.step(3, [])  # lost this frame -> predicted box emitted
    assert [tid for tid, _, _ in out3] == [1]
    assert out3[0][1].x > 110
    out4 = tracker.step(4, [])
    assert out4 == []


def test_removed_tracks_never_output():
    tracker = Tracker(TrackerConfig(track_buffer=1))
    tracker.step(1, [det(10, 10, 40, 80, 0.9)])
    for k in range(2, 6):
        out = tracker.step(k, [])
        assert out == []
    assert all(t.state != TrackState.REMOVED for t in tracker.tracked)


def test_warp_applied_to_predictions():
    cfg = TrackerConfig(use_cmc=True)
    tracker = Tracker(cfg)
    tracker.step(1, [det(100, 100, 40, 80, 0.9)], AffineWarp.identity())
    out = tracker.step(2, [det(150, 100, 40, 80, 0.9)], AffineWarp(1, 0, 50, 0, 1, 0))
    assert [tid for tid, _, _ in out] == [1]


def test_determinism_identical_runs():
    dets, warps, _ = panning_scene(n_frames=40)
    cfg = TrackerConfig(use_cmc=True)
    out1 = run_scene(dets, cfg, warps)
    out2 = run_scene(dets, cfg, warps)
    for k in out1:
        assert len(out1[k]) == len(out2[k])
        for a, b in zip(out1[k], out2[k]):
            assert a[0] == b[0]
            assert a[1] == b[1]
            assert a[2] == b[2]


# --- ablation scenes ----------------------------------------------------------


def eval_scene(outputs, gt):
    frames, numbers = eval_frames(gt, outputs_to_pred_frames(outputs))
    return evaluate(frames, 0.5, numbers)


def test_cmc_ablation_panning_scene():
    dets, warps, gt = panning_scene()
    with_cmc = eval_scene(run_scene(dets, TrackerConfig(use_cmc=True), warps), gt)
    without = eval_scene(run_scene(dets, TrackerConfig(use_cmc=False), warps), gt)
    assert with_cmc.idsw == 0
    assert with_cmc.mota >= 0.99
    assert without.idsw >= 1
    assert without.mota < with_cmc.mota


def test_reid_ablation_crossing_scene():
    dets, gt = crossing_scene()
    fused = eval_scene(
        run_scene(dets, TrackerConfig(use_reid=True, use_cmc=False)), gt
    )
    iou_only = eval_scene(
        run_scene(dets, TrackerConfig(use_reid=False, use_cmc=False)), gt
    )
    assert fused.idsw == 0
    assert iou_only.idsw >= 1
    assert fused.idf1 > iou_only.idf1


def test_missing_embeddings_fall_back_to_iou(caplog):
    cfg = TrackerConfig(use_reid=True)
    tracker = Tracker(cfg)
    import logging

    with caplog.at_level(logging.WARNING):
        tracker.step(1, [det(10, 10, 40, 80, 0.9)])
        out = tracker.step(2, [det(10, 10, 40, 80, 0.9)])
    assert [tid for tid, _, _ in out] == [1]
    assert any("falling back" in r.message for r in caplog.records)


def test_missing_embeddings_strict_mode_raises():
    cfg = TrackerConfig(use_reid=True, require_embeddings=True)
    tracker = Tracker(cfg)
    tracker.step(1, [det(10, 10, 40, 80, 0.9)])
    with pytest.raises(ValueError):
        tracker.step(2, [det(10, 10, 40, 80, 0.9)])
