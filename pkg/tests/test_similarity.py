import random

import pytest

from helpers import box, det, rand_int_box, spread_dets
from oracles import grid_iou, pixel_iou
from trafficlens.similarity import (
    MERGE_IOU,
    clip_similarity,
    detection_similarity,
    iou,
    match_detections,
    merge_detections,
    should_skip,
)
from trafficlens.types import ClipRecord, FrameRecord, SimilarityConfig


def int_box(coords):
    x0, y0, x1, y1 = coords
    return box(float(x0), float(y0), float(x1), float(y1))


def test_iou_hand_cases():
    assert iou(box(0, 0, 10, 10), box(0, 0, 10, 10)) == 1.0
    assert iou(box(0, 0, 10, 10), box(20, 20, 30, 30)) == 0.0
    # edge-touching boxes share zero area
    assert iou(box(0, 0, 10, 10), box(10, 0, 20, 10)) == 0.0
    # inter 50, union 150
    assert iou(box(0, 0, 10, 10), box(5, 0, 15, 10)) == pytest.approx(1 / 3, abs=1e-15)
    # containment: 25 / 100
    assert iou(box(0, 0, 10, 10), box(0, 0, 5, 5)) == pytest.approx(0.25, abs=1e-15)


def test_iou_matches_pixel_oracle():
    rng = random.Random(42)
    for _ in range(300):
        a = rand_int_box(rng)
        b = rand_int_box(rng)
        assert abs(iou(int_box(a), int_box(b)) - pixel_iou(a, b)) <= 1e-9


def test_iou_matches_full_grid_oracle_on_small_boxes():
    rng = random.Random(3)
    for _ in range(50):
        a = rand_int_box(rng, span=15, max_side=8)
        b = rand_int_box(rng, span=15, max_side=8)
        assert abs(iou(int_box(a), int_box(b)) - grid_iou(a, b)) <= 1e-9


def test_iou_symmetry_and_range():
    rng = random.Random(11)
    for _ in range(200):
        a, b = int_box(rand_int_box(rng)), int_box(rand_int_box(rng))
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0


def test_match_requires_equal_labels():
    assert match_detections([det("car")], [det("bus")]) == []


def test_match_greedy_prefers_highest_iou():
    base = [det("car", 0, 0, 10, 10)]
    # other[0] overlaps a little, other[1] is identical
    others = [det("car", 8, 0, 18, 10), det("car", 0, 0, 10, 10)]
    matches = match_detections(base, others)
    assert len(matches) == 1
    assert matches[0].other_index == 1
    assert matches[0].iou == 1.0


def test_match_each_detection_used_once():
    rng = random.Random(5)
    labels = ["car", "bus", "van"]
    for _ in range(50):
        base = [det(rng.choice(labels), *rand_int_box(rng, span=30, max_side=20))
                for _ in range(rng.randint(0, 8))]
        other = [det(rng.choice(labels), *rand_int_box(rng, span=30, max_side=20))
                 for _ in range(rng.randint(0, 8))]
        matches = match_detections(base, other)
        assert len({m.base_index for m in matches}) == len(matches)
        assert len({m.other_index for m in matches}) == len(matches)
        for m in matches:
            assert base[m.base_index].label == other[m.other_index].label
            assert m.iou > 0.0


def test_detection_similarity_edge_cases():
    assert detection_similarity([], []) == 1.0
    assert detection_similarity([det()], []) == 0.0
    assert detection_similarity([], [det()]) == 0.0


def test_detection_similarity_identical_sets():
    dets = list(spread_dets(["car", "bus", "bike"]))
    assert detection_similarity(dets, dets) == pytest.approx(1.0)


def test_detection_similarity_copy_construction():
    # 3 exact copies + 3 disjoint labels over max cardinality 6 -> exactly 0.5
    base = list(spread_dets(["car", "bus", "bike", "van", "truck", "taxi"]))
    other = base[:3] + list(spread_dets(["dog", "cart", "tree"], origin=1000.0))
    assert detection_similarity(base, other) == pytest.approx(0.5)


def test_detection_similarity_stays_in_unit_interval():
    rng = random.Random(9)
    labels = ["car", "bus"]
    for _ in range(100):
        base = [det(rng.choice(labels), *rand_int_box(rng, span=40, max_side=25))
                for _ in range(rng.randint(1, 10))]
        other = [det(rng.choice(labels), *rand_int_box(rng, span=40, max_side=25))
                 for _ in range(rng.randint(1, 10))]
        assert 0.0 <= detection_similarity(base, other) <= 1.0


def _clip(camera, dets, clip_id=0):
    return ClipRecord(
        clip_id=clip_id, camera=camera, start_ms=0, end_ms=10_000,
        key_frame=FrameRecord(camera=camera, timestamp_ms=5000),
        detections=tuple(dets),
    )


def test_clip_similarity_carries_matches():
    base = _clip("left", spread_dets(["car", "bus"]))
    other = _clip("right", spread_dets(["car", "bus"]), clip_id=0)
    sim = clip_similarity(base, other)
    assert sim.score == pytest.approx(1.0)
    assert len(sim.matches) == 2


def test_clip_similarity_empty_clips():
    sim = clip_similarity(_clip("left", []), _clip("right", []))
    assert sim.score == 1.0
    assert sim.matches == ()


def test_should_skip_boundary_is_inclusive():
    cfg = SimilarityConfig(delta=0.21)
    base = _clip("left", spread_dets([f"l{i}" for i in range(100)]))
    # 21 copies of 100 -> score exactly 0.21
    other = _clip("right", tuple(base.detections[:21]) + spread_dets(
        [f"r{i}" for i in range(79)], origin=50_000.0))
    sim = clip_similarity(base, other)
    assert sim.score == pytest.approx(0.21)
    assert should_skip(sim, cfg)

    barely_below = _clip("right", tuple(base.detections[:20]) + spread_dets(
        [f"r{i}" for i in range(80)], origin=50_000.0))
    assert not should_skip(clip_similarity(base, barely_below), cfg)


def test_should_skip_extreme_thresholds():
    base = _clip("left", spread_dets(["car"]))
    disjoint = _clip("right", spread_dets(["dog"], origin=9000.0))
    assert should_skip(clip_similarity(base, disjoint), SimilarityConfig(delta=0.0))
    identical = _clip("right", base.detections)
    assert should_skip(clip_similarity(base, identical), SimilarityConfig(delta=1.0))
    assert not should_skip(clip_similarity(base, disjoint), SimilarityConfig(delta=1.0))


def test_merge_detections_dedups_only_tight_same_label_overlap():
    a = det("car", 0, 0, 100, 100)
    near_dup = det("car", 0, 0, 100, 99)            # iou 0.99 > MERGE_IOU
    at_threshold = det("car", 0, 0, 100, 80)        # iou exactly 0.80, kept
    other_label = det("bus", 0, 0, 100, 100)
    assert iou(a.box, near_dup.box) > MERGE_IOU
    assert iou(a.box, at_threshold.box) == pytest.approx(MERGE_IOU)

    merged = merge_detections([[a], [near_dup, at_threshold, other_label]])
    labels = sorted(d.label for d in merged)
    assert labels == ["bus", "car", "car"]
    assert near_dup not in merged


def test_merge_detections_keeps_first_seen():
    a = det("car", 0, 0, 100, 100)
    dup = det("car", 0, 0, 100, 99)
    merged = merge_detections([[a], [dup]])
    assert merged == (a,)
