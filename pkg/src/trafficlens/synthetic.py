"""Seeded synthetic two-camera fixtures for benchmarks and sweeps.

The standard fixture builds aligned clip windows where half the camera
pairs are constructed redundant (similarity at or above the 0.21 skip
threshold) and half novel, with graded scores so threshold sweeps move
gradually. All randomness flows from one seed; the engine itself stays
deterministic.
"""

from __future__ import annotations

import math
import random
from pathlib import Path

from trafficlens.frontend import CameraFeedManifest, serialize_manifest
from trafficlens.types import BoundingBox, Detection, FrameRecord

# Disjoint label pools: follower-only labels never appear in base narratives,
# so processed follow-up calls always have something new to say.
BASE_LABELS = (
    "sedan", "truck", "bicycle", "pedestrian", "bus",
    "van", "scooter", "motorcycle", "taxi", "jeep",
)
NOVEL_LABELS = (
    "stroller", "skateboard", "tractor", "ambulance", "trailer",
    "wagon", "minibus", "crane", "forklift", "rickshaw",
)

SKIP_THRESHOLD = 0.21


def _random_box(rng: random.Random) -> BoundingBox:
    x0 = rng.randint(0, 1800)
    y0 = rng.randint(0, 960)
    return BoundingBox(
        x_min=float(x0),
        y_min=float(y0),
        x_max=float(x0 + rng.randint(24, 120)),
        y_max=float(y0 + rng.randint(24, 120)),
    )


def standard_fixture(
    seed: int = 0,
    clips: int = 200,
    clip_ms: int = 10000,
    frame_gap_ms: int = 5000,
    detections_per_clip: int = 20,
    cameras: tuple[str, str] = ("left", "right"),
) -> list[CameraFeedManifest]:
    """Two aligned synthetic feeds with a graded 50/50 redundant/novel split.

    In each clip window the second camera repeats k of the first camera's
    detections exactly and adds novel-label ones for the rest, so the pair's
    similarity is exactly k / detections_per_clip. Half the windows draw k
    at or above the skip threshold, half below.
    """
    if clips < 2:
        raise ValueError("fixture needs at least 2 clip windows")
    if clip_ms % frame_gap_ms != 0:
        raise ValueError("frame_gap_ms must divide clip_ms for exact clip tiling")
    rng = random.Random(seed)

    d = detections_per_clip
    redundant_min = max(1, math.ceil(SKIP_THRESHOLD * d))
    redundant_half = clips // 2
    ks = [rng.randint(redundant_min, d) for _ in range(redundant_half)]
    ks += [rng.randint(0, redundant_min - 1) for _ in range(clips - redundant_half)]
    rng.shuffle(ks)

    frames_per_clip = clip_ms // frame_gap_ms
    base_cam, other_cam = cameras
    base_frames: list[FrameRecord] = []
    other_frames: list[FrameRecord] = []

    for i, k in enumerate(ks):
        base_dets = tuple(
            Detection(label=rng.choice(BASE_LABELS), box=_random_box(rng))
            for _ in range(d)
        )
        copied_idx = sorted(rng.sample(range(d), k))
        other_dets = tuple(base_dets[j] for j in copied_idx) + tuple(
            Detection(label=rng.choice(NOVEL_LABELS), box=_random_box(rng))
            for _ in range(d - k)
        )
        for j in range(frames_per_clip):
            ts = i * clip_ms + j * frame_gap_ms
            base_frames.append(
                FrameRecord(camera=base_cam, timestamp_ms=ts, detections=base_dets)
            )
            other_frames.append(
                FrameRecord(camera=other_cam, timestamp_ms=ts, detections=other_dets)
            )

    return [
        CameraFeedManifest(camera=base_cam, frames=tuple(base_frames)),
        CameraFeedManifest(camera=other_cam, frames=tuple(other_frames)),
    ]


def write_fixture(manifests: list[CameraFeedManifest], out_dir: str | Path) -> list[Path]:
    """Serialize fixture feeds to one manifest file per camera."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for feed in manifests:
        path = out / f"{feed.camera}.jsonl"
        path.write_text(serialize_manifest(feed), encoding="utf-8")
        paths.append(path)
    return paths
