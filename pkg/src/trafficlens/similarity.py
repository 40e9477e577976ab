"""Object-level clip similarity: decides when a follow-up camera's clip is
redundant enough to skip its vision-model call.

Boxes from different viewpoints are compared in raw pixel space on
label-matched pairs; the threshold delta absorbs viewpoint disparity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from trafficlens.types import BoundingBox, ClipRecord, Detection, SimilarityConfig

# Per-frame detections closer than this IoU under the same label collapse to
# one object when merging a clip's detection set.
MERGE_IOU = 0.8


@dataclass(frozen=True)
class DetectionMatch:
    """A label-equal pairing between two detection lists with its IoU."""

    base_index: int
    other_index: int
    iou: float


@dataclass(frozen=True)
class ClipSimilarity:
    """Aggregate similarity score in [0, 1] plus the matches behind it."""

    score: float
    matches: tuple[DetectionMatch, ...] = ()


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0.0 when disjoint."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


def match_detections(
    base: Sequence[Detection], other: Sequence[Detection]
) -> list[DetectionMatch]:
    """Greedily pair detections of equal label, highest IoU first.

    Each detection is used at most once; zero-IoU candidates are discarded.
    Ties break toward lower indices so matching is order-deterministic.
    """
    candidates: list[tuple[float, int, int]] = []
    for i, det_b in enumerate(base):
        for j, det_o in enumerate(other):
            if det_b.label != det_o.label:
                continue
            overlap = iou(det_b.box, det_o.box)
            if overlap > 0.0:
                candidates.append((overlap, i, j))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))

    matches: list[DetectionMatch] = []
    used_base: set[int] = set()
    used_other: set[int] = set()
    for overlap, i, j in candidates:
        if i in used_base or j in used_other:
            continue
        used_base.add(i)
        used_other.add(j)
        matches.append(DetectionMatch(base_index=i, other_index=j, iou=overlap))
    return matches


def detection_similarity(base: Sequence[Detection], other: Sequence[Detection]) -> float:
    """Similarity of two detection sets: summed matched IoU over the larger
    cardinality. Two empty sets score 1.0 (an empty road looks the same
    from every camera)."""
    if not base and not other:
        return 1.0
    if not base or not other:
        return 0.0
    matched = match_detections(base, other)
    total = sum(m.iou for m in matched)
    return total / max(len(base), len(other))


def clip_similarity(base: ClipRecord, other: ClipRecord) -> ClipSimilarity:
    """Score how much of the base clip's content the other camera repeats."""
    if not base.detections and not other.detections:
        return ClipSimilarity(score=1.0)
    matches = tuple(match_detections(base.detections, other.detections))
    denom = max(len(base.detections), len(other.detections))
    score = sum(m.iou for m in matches) / denom if denom else 1.0
    return ClipSimilarity(score=score, matches=matches)


def should_skip(sim: ClipSimilarity, cfg: SimilarityConfig) -> bool:
    """True when the clip is redundant: score at or above the threshold.

    The boundary counts as redundant so delta=1.0 can still skip perfect
    duplicates.
    """
    return sim.score >= cfg.delta


def merge_detections(groups: Sequence[Sequence[Detection]]) -> tuple[Detection, ...]:
    """Union per-frame detections into a clip-level set.

    Greedy dedup: a detection is dropped when an already-kept one shares its
    label and overlaps above MERGE_IOU.
    """
    kept: list[Detection] = []
    for group in groups:
        for det in group:
            duplicate = any(
                k.label == det.label and iou(k.box, det.box) > MERGE_IOU for k in kept
            )
            if not duplicate:
                kept.append(det)
    return tuple(kept)
