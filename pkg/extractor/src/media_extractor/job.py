"""Extraction job description."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

DEFAULT_SAMPLE_RATE_HZ = 1.0 / 3.0
DEFAULT_MIN_CONFIDENCE = 0.3
DEFAULT_DETECTOR = "contour"


@dataclass(frozen=True)
class ExtractionJob:
    """One video in, one manifest plus frame images out."""

    video_path: str | Path
    camera_id: str
    output_dir: str | Path
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    detector: str = DEFAULT_DETECTOR
    min_confidence: float = DEFAULT_MIN_CONFIDENCE

    def __post_init__(self) -> None:
        if not self.camera_id:
            raise ValueError("camera_id must be non-empty")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.min_confidence < 0:
            raise ValueError(f"min_confidence must be non-negative, got {self.min_confidence}")

    @property
    def frame_period_ms(self) -> float:
        return 1000.0 / self.sample_rate_hz
