"""Feed intake: parse per-camera manifests, segment feeds into clips, and
time-align other cameras' clips to the base camera's clips.

Manifest wire format (one UTF-8 JSON object per line):

    {"camera":"left","ts_ms":3000,"media":"frames/left/000001.jpg",
     "detections":[{"label":"car","box":[x0,y0,x1,y1],"conf":0.91}]}

Field order is irrelevant, "media" is optional, and unknown fields are
ignored for forward compatibility. This format is the bit-exact contract
with the offline media extractor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

from trafficlens.similarity import detection_similarity, merge_detections
from trafficlens.types import (
    BoundingBox,
    CameraId,
    ClipRecord,
    Detection,
    FrameRecord,
    validate_clip_sequence,
)


class ManifestError(ValueError):
    """A manifest stream violated the wire format; carries the line number."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"manifest line {line_no}: {message}")
        self.line_no = line_no


class EmptyFeedError(ValueError):
    """Segmentation was asked to run on a feed with no frames."""


@dataclass(frozen=True)
class CameraFeedManifest:
    """One camera's ordered frame records plus its inferred frame rate."""

    camera: CameraId
    frames: tuple[FrameRecord, ...]
    frame_rate_hz: float = 0.0

    def __post_init__(self) -> None:
        for prev, cur in zip(self.frames, self.frames[1:]):
            if cur.timestamp_ms <= prev.timestamp_ms:
                raise ValueError(
                    f"frame timestamps must strictly increase: {prev.timestamp_ms} "
                    f"then {cur.timestamp_ms}"
                )
        for frame in self.frames:
            if frame.camera != self.camera:
                raise ValueError(
                    f"frame at {frame.timestamp_ms} carries camera {frame.camera!r}, "
                    f"expected {self.camera!r}"
                )
        if self.frame_rate_hz <= 0.0:
            object.__setattr__(self, "frame_rate_hz", _infer_rate_hz(self.frames))

    @property
    def frame_period_ms(self) -> int:
        return max(1, round(1000.0 / self.frame_rate_hz))


def _infer_rate_hz(frames: Sequence[FrameRecord]) -> float:
    # The wire format carries no rate field, so derive it from the span.
    if len(frames) < 2:
        return 1.0
    span_ms = frames[-1].timestamp_ms - frames[0].timestamp_ms
    return (len(frames) - 1) * 1000.0 / span_ms


@dataclass(frozen=True)
class SegmenterConfig:
    """Clip boundary policy: a hard window plus a detection-change trigger."""

    window_ms: int = 10000
    change_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.window_ms < 1000:
            raise ValueError(f"window_ms must be >= 1000: {self.window_ms}")
        if not (0.0 <= self.change_threshold <= 1.0):
            raise ValueError(f"change_threshold must be in [0, 1]: {self.change_threshold}")


@dataclass(frozen=True)
class AlignedClipPair:
    """A base-camera clip with the best-overlapping clip of each other camera."""

    base: ClipRecord
    others: tuple[tuple[CameraId, ClipRecord | None], ...] = field(default=())


def _parse_detection(obj: object, line_no: int) -> Detection:
    if not isinstance(obj, dict):
        raise ManifestError(line_no, f"detection must be an object, got {type(obj).__name__}")
    label = obj.get("label")
    if not isinstance(label, str) or not label:
        raise ManifestError(line_no, "detection needs a non-empty string 'label'")
    box = obj.get("box")
    if not isinstance(box, list) or len(box) != 4:
        raise ManifestError(line_no, "detection 'box' must be [x_min,y_min,x_max,y_max]")
    try:
        coords = [float(v) for v in box]
        bbox = BoundingBox(*coords)
    except (TypeError, ValueError) as exc:
        raise ManifestError(line_no, f"bad box {box}: {exc}") from exc
    conf = obj.get("conf", 1.0)
    if not isinstance(conf, (int, float)) or not (0.0 <= conf <= 1.0):
        raise ManifestError(line_no, f"detection 'conf' must be in [0, 1]: {conf}")
    return Detection(label=label, box=bbox, confidence=float(conf))


def parse_manifest(stream: Iterable[str] | IO[bytes]) -> CameraFeedManifest:
    """Parse a newline-delimited manifest stream into a validated feed.

    Raises ManifestError with the offending line number on malformed records,
    mixed camera ids, or non-monotone timestamps.
    """
    camera: CameraId | None = None
    frames: list[FrameRecord] = []
    last_ts = -1
    line_no = 0
    for raw in stream:
        line_no += 1
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(record, dict):
            raise ManifestError(line_no, "record must be a JSON object")

        cam = record.get("camera")
        if not isinstance(cam, str) or not cam:
            raise ManifestError(line_no, "record needs a non-empty string 'camera'")
        if camera is None:
            camera = cam
        elif cam != camera:
            raise ManifestError(line_no, f"camera {cam!r} differs from manifest camera {camera!r}")

        ts = record.get("ts_ms")
        if not isinstance(ts, int) or isinstance(ts, bool) or ts < 0:
            raise ManifestError(line_no, f"record needs integer 'ts_ms' >= 0, got {ts!r}")
        if ts <= last_ts:
            raise ManifestError(
                line_no, f"non-monotone timestamp {ts} after {last_ts}"
            )
        last_ts = ts

        media = record.get("media")
        if media is not None and not isinstance(media, str):
            raise ManifestError(line_no, "'media' must be a string when present")

        raw_dets = record.get("detections", [])
        if not isinstance(raw_dets, list):
            raise ManifestError(line_no, "'detections' must be a list")
        detections = tuple(_parse_detection(d, line_no) for d in raw_dets)

        frames.append(
            FrameRecord(camera=cam, timestamp_ms=ts, detections=detections, media_ref=media)
        )

    if camera is None:
        raise ManifestError(0, "manifest contains no records")
    return CameraFeedManifest(camera=camera, frames=tuple(frames))


def serialize_manifest(feed: CameraFeedManifest) -> str:
    """Render a feed back to the wire format, one record per line."""
    lines = []
    for frame in feed.frames:
        record: dict[str, object] = {"camera": frame.camera, "ts_ms": frame.timestamp_ms}
        if frame.media_ref is not None:
            record["media"] = frame.media_ref
        record["detections"] = [
            {
                "label": d.label,
                "box": [d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max],
                "conf": d.confidence,
            }
            for d in frame.detections
        ]
        lines.append(json.dumps(record, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def load_manifest(path: str | Path) -> CameraFeedManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_manifest(fh)


def segment_clips(feed: CameraFeedManifest, cfg: SegmenterConfig | None = None) -> list[ClipRecord]:
    """Split a feed into non-overlapping clips that tile its time span.

    A boundary lands on a frame when the window has elapsed since the last
    boundary or when the detection-set change score versus the previous
    frame exceeds the change threshold. The key frame is the one closest to
    the clip's temporal middle.
    """
    cfg = cfg or SegmenterConfig()
    if not feed.frames:
        raise EmptyFeedError(f"feed {feed.camera!r} has no frames")

    groups: list[list[FrameRecord]] = []
    current: list[FrameRecord] = [feed.frames[0]]
    for prev, cur in zip(feed.frames, feed.frames[1:]):
        elapsed = cur.timestamp_ms - current[0].timestamp_ms
        if elapsed >= cfg.window_ms or _change_score(prev, cur) > cfg.change_threshold:
            groups.append(current)
            current = [cur]
        else:
            current.append(cur)
    groups.append(current)

    feed_end = feed.frames[-1].timestamp_ms + feed.frame_period_ms
    clips: list[ClipRecord] = []
    for idx, group in enumerate(groups):
        start = group[0].timestamp_ms
        end = groups[idx + 1][0].timestamp_ms if idx + 1 < len(groups) else feed_end
        clips.append(
            ClipRecord(
                clip_id=idx,
                camera=feed.camera,
                start_ms=start,
                end_ms=end,
                key_frame=_middle_frame(group, start, end),
                detections=merge_detections([f.detections for f in group]),
            )
        )
    return clips


def _change_score(prev: FrameRecord, cur: FrameRecord) -> float:
    return 1.0 - detection_similarity(prev.detections, cur.detections)


def _middle_frame(group: list[FrameRecord], start: int, end: int) -> FrameRecord:
    midpoint = (start + end) / 2.0
    return min(group, key=lambda f: (abs(f.timestamp_ms - midpoint), f.timestamp_ms))


def _overlap_ms(a: ClipRecord, b: ClipRecord) -> int:
    return max(0, min(a.end_ms, b.end_ms) - max(a.start_ms, b.start_ms))


def align_clips(
    base: list[ClipRecord], other: list[ClipRecord], camera: CameraId | None = None
) -> list[AlignedClipPair]:
    """Pair each base clip with the other camera's best-overlapping clip.

    Greedy by overlap descending, each other clip used at most once; a base
    clip pairs with nothing when the best remaining overlap is under half
    its duration. Ties break toward earlier start times so input order
    never changes the pairing.
    """
    for name, clips in (("base", base), ("other", other)):
        violations = validate_clip_sequence(clips)
        if violations:
            raise ValueError(f"{name} clips invalid: {violations}")
    if camera is None:
        camera = other[0].camera if other else "unknown"

    candidates: list[tuple[int, int, int, int, int]] = []
    for i, b in enumerate(base):
        for j, o in enumerate(other):
            ov = _overlap_ms(b, o)
            if ov * 2 >= b.duration_ms and ov > 0:
                candidates.append((-ov, o.start_ms, b.start_ms, i, j))
    candidates.sort()

    chosen: dict[int, ClipRecord] = {}
    used_other: set[int] = set()
    for _neg_ov, _o_start, _b_start, i, j in candidates:
        if i in chosen or j in used_other:
            continue
        chosen[i] = other[j]
        used_other.add(j)

    return [
        AlignedClipPair(base=b, others=((camera, chosen.get(i)),))
        for i, b in enumerate(base)
    ]


def align_all(
    base: list[ClipRecord], others: dict[CameraId, list[ClipRecord]]
) -> list[AlignedClipPair]:
    """Compose per-camera alignments into one pair per base clip, preserving
    the given camera order."""
    per_camera = {
        cam: align_clips(base, clips, camera=cam) for cam, clips in others.items()
    }
    pairs = []
    for i, b in enumerate(base):
        slots = tuple(
            (cam, per_camera[cam][i].others[0][1]) for cam in others
        )
        pairs.append(AlignedClipPair(base=b, others=slots))
    return pairs
