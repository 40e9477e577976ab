"""Shared domain vocabulary: frames, clips, detections, budgets, documents.

All types are immutable value objects validated at construction; they carry
no behavior beyond validation and formatting helpers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

# Camera identifiers are short strings such as "left" or "right"; uniqueness
# within one intersection configuration is enforced where configurations are
# assembled, not here.
CameraId = str

SegmentRole = Literal["base", "followup"]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, exclusive of the max edge."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"box coordinates must be non-negative: {self}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box must have positive extent: {self}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)


@dataclass(frozen=True)
class Detection:
    """One detected object: class label, box, and detector confidence."""

    label: str
    box: BoundingBox
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("detection label must be non-empty")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1]: {self.confidence}")


@dataclass(frozen=True)
class FrameRecord:
    """A single sampled frame of one camera's feed.

    media_ref locates the frame image (path or URI). It may be None only
    when the run uses the mock backend, which reads detections instead of
    pixels.
    """

    camera: CameraId
    timestamp_ms: int
    detections: tuple[Detection, ...] = ()
    media_ref: str | None = None

    def __post_init__(self) -> None:
        if not self.camera:
            raise ValueError("camera id must be non-empty")
        if self.timestamp_ms < 0:
            raise ValueError(f"timestamp_ms must be >= 0: {self.timestamp_ms}")


@dataclass(frozen=True)
class ClipRecord:
    """A non-overlapping time slice [start_ms, end_ms) of one camera's feed.

    key_frame is the representative frame sent to the vision model;
    detections is the merged detection set over the clip's frames.
    """

    clip_id: int
    camera: CameraId
    start_ms: int
    end_ms: int
    key_frame: FrameRecord
    detections: tuple[Detection, ...] = ()

    def __post_init__(self) -> None:
        if self.start_ms >= self.end_ms:
            raise ValueError(
                f"clip {self.clip_id}: start_ms {self.start_ms} must precede end_ms {self.end_ms}"
            )
        if not (self.start_ms <= self.key_frame.timestamp_ms <= self.end_ms):
            raise ValueError(
                f"clip {self.clip_id}: key frame at {self.key_frame.timestamp_ms} "
                f"outside [{self.start_ms}, {self.end_ms}]"
            )

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class TokenBudgetSchedule:
    """Maximum-output-token limits per camera rank.

    base_limit applies to the base camera (rank 0), followup_limit to every
    later camera; baseline_limit is the single budget used by the
    unoptimized per-camera mode.
    """

    base_limit: int = 80
    followup_limit: int = 32
    baseline_limit: int = 256

    def __post_init__(self) -> None:
        if self.followup_limit < 1:
            raise ValueError("followup_limit must be positive")
        if not (self.followup_limit <= self.base_limit <= self.baseline_limit):
            raise ValueError(
                "budget schedule must satisfy followup <= base <= baseline, got "
                f"{self.followup_limit}/{self.base_limit}/{self.baseline_limit}"
            )


@dataclass(frozen=True)
class SimilarityConfig:
    """Clip-similarity threshold: scores at or above delta skip the call."""

    delta: float = 0.21

    def __post_init__(self) -> None:
        if not (0.0 <= self.delta <= 1.0):
            raise ValueError(f"delta must be in [0, 1]: {self.delta}")


@dataclass(frozen=True)
class NarrativeSegment:
    """Model-produced text for one (clip, camera) pair plus call metadata."""

    clip_id: int
    camera: CameraId
    role: SegmentRole
    text: str
    prompt_tokens: int = 0
    output_tokens: int = 0
    latency_ms: int = 0
    skipped: bool = False
    error: str | None = None

    def __post_init__(self) -> None:
        if min(self.prompt_tokens, self.output_tokens, self.latency_ms) < 0:
            raise ValueError("token and latency counters must be non-negative")
        if self.skipped and (self.text or self.output_tokens):
            raise ValueError("a skipped segment must carry no text and no output tokens")
        if self.role == "base" and self.skipped:
            raise ValueError("the base segment of a clip is never skipped")


@dataclass(frozen=True)
class DocumentEntry:
    """One clip window's combined narrative, keyed by its start time."""

    start_ms: int
    end_ms: int
    text: str

    def render(self) -> str:
        """Format as shown in query contexts: 'HH:MM:SS :' then the text."""
        return f"{format_timestamp(self.start_ms)} :\n{self.text}"


@dataclass(frozen=True)
class IntersectionDocument:
    """Time-ordered narrative entries, one per base-camera clip."""

    entries: tuple[DocumentEntry, ...] = field(default=())

    def __post_init__(self) -> None:
        starts = [e.start_ms for e in self.entries]
        if starts != sorted(starts):
            raise ValueError("document entries must be sorted by start_ms")

    def render(self) -> str:
        return "\n".join(entry.render() for entry in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def format_timestamp(ms: int) -> str:
    """Format milliseconds-from-start as zero-padded HH:MM:SS (hours unbounded)."""
    if ms < 0:
        raise ValueError(f"timestamp must be non-negative: {ms}")
    total_seconds = ms // 1000
    hours, rem = divmod(total_seconds, 3600)
    minutes, seconds = divmod(rem, 60)
    return f"{hours:02d}:{minutes:02d}:{seconds:02d}"


def validate_clip_sequence(clips: list[ClipRecord]) -> list[str]:
    """Check one camera's clip list for ordering and overlap violations.

    Returns a list of human-readable violation messages; an empty list means
    the sequence is valid. Violations are data, not exceptions.
    """
    violations: list[str] = []
    cameras = {c.camera for c in clips}
    if len(cameras) > 1:
        violations.append(f"clips span multiple cameras: {sorted(cameras)}")
    for i, clip in enumerate(clips):
        if clip.start_ms >= clip.end_ms:
            violations.append(f"clip {i} has empty time range [{clip.start_ms}, {clip.end_ms})")
    for i in range(len(clips) - 1):
        if clips[i].start_ms > clips[i + 1].start_ms:
            violations.append(f"clip {i + 1} starts before clip {i} (disorder)")
    for i in range(len(clips)):
        for j in range(i + 1, len(clips)):
            a, b = clips[i], clips[j]
            if a.start_ms < b.end_ms and b.start_ms < a.end_ms:
                violations.append(f"overlap between clip {i} and {j}")
    return violations
