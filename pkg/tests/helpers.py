"""Small builders shared across test modules."""

from __future__ import annotations

import random
from typing import Sequence

from trafficlens.frontend import CameraFeedManifest
from trafficlens.types import BoundingBox, Detection, FrameRecord


def box(x0: float = 0.0, y0: float = 0.0, x1: float = 10.0, y1: float = 10.0) -> BoundingBox:
    return BoundingBox(x_min=x0, y_min=y0, x_max=x1, y_max=y1)


def det(label: str = "car", x0: float = 0.0, y0: float = 0.0,
        x1: float = 10.0, y1: float = 10.0, conf: float = 1.0) -> Detection:
    return Detection(label=label, box=box(x0, y0, x1, y1), confidence=conf)


def feed(camera: str, per_frame: Sequence[Sequence[Detection]],
         gap_ms: int = 1000, start_ms: int = 0, media: str | None = None) -> CameraFeedManifest:
    """Build a feed with one frame per detection group, evenly spaced."""
    frames = tuple(
        FrameRecord(
            camera=camera,
            timestamp_ms=start_ms + i * gap_ms,
            detections=tuple(group),
            media_ref=media,
        )
        for i, group in enumerate(per_frame)
    )
    return CameraFeedManifest(camera=camera, frames=frames)


def rand_int_box(rng: random.Random, span: int = 200, max_side: int = 40) -> tuple[int, int, int, int]:
    x0 = rng.randint(0, span)
    y0 = rng.randint(0, span)
    return (x0, y0, x0 + rng.randint(1, max_side), y0 + rng.randint(1, max_side))


def spread_dets(labels: Sequence[str], origin: float = 0.0) -> tuple[Detection, ...]:
    """Detections far enough apart that no pair overlaps."""
    return tuple(
        det(label, x0=origin + i * 100.0, y0=0.0, x1=origin + i * 100.0 + 50.0, y1=50.0)
        for i, label in enumerate(labels)
    )
