"""Run baseline or accelerated ingestion over multi-camera feeds and
assemble the intersection document.

Accounting note: within one clip the camera chain is sequential (a
follow-up prompt embeds earlier text), while distinct clips are
independent. total_latency_ms sums per-call latencies over all chains,
matching a single-worker schedule; wall_ms reports real elapsed time
separately and is never used in speedup ratios.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from trafficlens.frontend import (
    AlignedClipPair,
    CameraFeedManifest,
    SegmenterConfig,
    align_all,
    segment_clips,
)
from trafficlens.gateway import Backend, BackendError, DescribeRequest
from trafficlens.prompts import (
    AccumulationPolicy,
    IngestMode,
    base_prompt,
    budget_for,
    followup_prompt,
)
from trafficlens.similarity import clip_similarity, should_skip
from trafficlens.types import (
    CameraId,
    ClipRecord,
    DocumentEntry,
    IntersectionDocument,
    NarrativeSegment,
    SimilarityConfig,
    TokenBudgetSchedule,
)


class MissingCameraError(ValueError):
    """A camera named in the configuration has no feed."""


class MissingBaseSegmentError(ValueError):
    """Document assembly found a base clip without its base narrative."""


@dataclass(frozen=True)
class IngestionConfig:
    base_camera: CameraId
    camera_order: tuple[CameraId, ...]
    mode: IngestMode = "trafficlens"
    schedule: TokenBudgetSchedule = field(default_factory=TokenBudgetSchedule)
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    accumulation: AccumulationPolicy = field(default_factory=AccumulationPolicy)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.camera_order:
            raise ValueError("camera_order must name at least one camera")
        if len(set(self.camera_order)) != len(self.camera_order):
            raise ValueError(f"camera_order has duplicates: {self.camera_order}")
        if self.camera_order[0] != self.base_camera:
            raise ValueError(
                f"base camera {self.base_camera!r} must come first in camera_order"
            )
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class ClipError:
    camera: CameraId
    clip_id: int
    message: str


@dataclass(frozen=True)
class IngestionReport:
    config: IngestionConfig
    document: IntersectionDocument
    segments: tuple[NarrativeSegment, ...]
    pairs: tuple[AlignedClipPair, ...]
    total_latency_ms: int
    vlm_calls: int
    skipped_clips: int
    wall_ms: int
    errors: tuple[ClipError, ...] = ()


@dataclass(frozen=True)
class SpeedupSummary:
    baseline_ms: int
    trafficlens_ms: int
    ratio: float


def _prepare(
    feeds: list[CameraFeedManifest], cfg: IngestionConfig
) -> tuple[dict[CameraId, list[ClipRecord]], list[AlignedClipPair]]:
    by_camera = {f.camera: f for f in feeds}
    for cam in cfg.camera_order:
        if cam not in by_camera:
            raise MissingCameraError(f"no feed for camera {cam!r}")
    clips = {cam: segment_clips(by_camera[cam], cfg.segmenter) for cam in cfg.camera_order}
    followers = {cam: clips[cam] for cam in cfg.camera_order[1:]}
    pairs = align_all(clips[cfg.base_camera], followers)
    return clips, pairs


def ingest(
    feeds: list[CameraFeedManifest], cfg: IngestionConfig, backend: Backend
) -> IngestionReport:
    """Convert the feeds to a timestamped text document through the backend."""
    started = time.monotonic()
    clips, pairs = _prepare(feeds, cfg)

    if cfg.mode == "baseline":
        segments, errors = _run_baseline(clips, cfg, backend)
    else:
        segments, errors = _run_trafficlens(pairs, cfg, backend)

    failed_base = {e.clip_id for e in errors if e.camera == cfg.base_camera}
    document_pairs = [p for p in pairs if p.base.clip_id not in failed_base]
    document = assemble_document(document_pairs, segments)

    return IngestionReport(
        config=cfg,
        document=document,
        segments=tuple(segments),
        pairs=tuple(pairs),
        total_latency_ms=sum(s.latency_ms for s in segments),
        vlm_calls=sum(1 for s in segments if not s.skipped),
        skipped_clips=sum(1 for s in segments if s.skipped),
        wall_ms=round((time.monotonic() - started) * 1000),
        errors=tuple(errors),
    )


def _map_units(units, worker, workers: int):
    if workers > 1 and len(units) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, units))
    return [worker(u) for u in units]


def _run_baseline(
    clips: dict[CameraId, list[ClipRecord]], cfg: IngestionConfig, backend: Backend
) -> tuple[list[NarrativeSegment], list[ClipError]]:
    budget = budget_for(0, cfg.schedule, "baseline")
    units = [clip for cam in cfg.camera_order for clip in clips[cam]]

    def describe_clip(clip: ClipRecord):
        req = DescribeRequest(
            prompt=base_prompt(),
            max_output_tokens=budget,
            media_ref=clip.key_frame.media_ref,
            detections=clip.detections,
        )
        try:
            text, usage = backend.describe(req)
        except BackendError as exc:
            return ClipError(camera=clip.camera, clip_id=clip.clip_id, message=str(exc))
        return NarrativeSegment(
            clip_id=clip.clip_id,
            camera=clip.camera,
            role="base",
            text=text,
            prompt_tokens=usage.prompt_tokens,
            output_tokens=usage.output_tokens,
            latency_ms=usage.latency_ms,
        )

    results = _map_units(units, describe_clip, cfg.workers)
    segments = [r for r in results if isinstance(r, NarrativeSegment)]
    errors = [r for r in results if isinstance(r, ClipError)]
    return segments, errors


def _run_trafficlens(
    pairs: list[AlignedClipPair], cfg: IngestionConfig, backend: Backend
) -> tuple[list[NarrativeSegment], list[ClipError]]:
    def process_pair(pair: AlignedClipPair) -> tuple[list[NarrativeSegment], list[ClipError]]:
        segments: list[NarrativeSegment] = []
        base_clip = pair.base
        base_req = DescribeRequest(
            prompt=base_prompt(),
            max_output_tokens=budget_for(0, cfg.schedule, "trafficlens"),
            media_ref=base_clip.key_frame.media_ref,
            detections=base_clip.detections,
        )
        try:
            base_text, base_usage = backend.describe(base_req)
        except BackendError as exc:
            # A failed base call aborts the whole clip chain.
            return [], [ClipError(base_clip.camera, base_clip.clip_id, str(exc))]
        segments.append(
            NarrativeSegment(
                clip_id=base_clip.clip_id,
                camera=base_clip.camera,
                role="base",
                text=base_text,
                prompt_tokens=base_usage.prompt_tokens,
                output_tokens=base_usage.output_tokens,
                latency_ms=base_usage.latency_ms,
            )
        )

        errors: list[ClipError] = []
        prior = base_text
        for rank, (camera, other) in enumerate(pair.others, start=1):
            if other is None:
                continue  # absent is not redundancy; nothing to call or count
            sim = clip_similarity(base_clip, other)
            if should_skip(sim, cfg.similarity):
                segments.append(
                    NarrativeSegment(
                        clip_id=other.clip_id, camera=camera, role="followup",
                        text="", skipped=True,
                    )
                )
                continue
            req = DescribeRequest(
                prompt=followup_prompt(prior, cfg.accumulation),
                max_output_tokens=budget_for(rank, cfg.schedule, "trafficlens"),
                media_ref=other.key_frame.media_ref,
                detections=other.detections,
            )
            try:
                text, usage = backend.describe(req)
            except BackendError as exc:
                # Degrade to a flagged skip instead of aborting the run.
                errors.append(ClipError(camera, other.clip_id, str(exc)))
                segments.append(
                    NarrativeSegment(
                        clip_id=other.clip_id, camera=camera, role="followup",
                        text="", skipped=True, error=str(exc),
                    )
                )
                continue
            segments.append(
                NarrativeSegment(
                    clip_id=other.clip_id,
                    camera=camera,
                    role="followup",
                    text=text,
                    prompt_tokens=usage.prompt_tokens,
                    output_tokens=usage.output_tokens,
                    latency_ms=usage.latency_ms,
                )
            )
            if cfg.accumulation.mode == "accumulate" and text:
                prior = f"{prior} {text}"
        return segments, errors

    results = _map_units(pairs, process_pair, cfg.workers)
    segments = [s for segs, _ in results for s in segs]
    errors = [e for _, errs in results for e in errs]
    return segments, errors


def assemble_document(
    pairs: list[AlignedClipPair], segments: list[NarrativeSegment] | tuple[NarrativeSegment, ...]
) -> IntersectionDocument:
    """One entry per base clip: the base narrative followed by each
    non-skipped other-camera narrative of that clip window, time-sorted."""
    by_key = {(s.camera, s.clip_id): s for s in segments}
    entries = []
    for pair in sorted(pairs, key=lambda p: p.base.start_ms):
        base_seg = by_key.get((pair.base.camera, pair.base.clip_id))
        if base_seg is None:
            raise MissingBaseSegmentError(
                f"no base segment for clip {pair.base.clip_id} "
                f"({pair.base.camera!r} @ {pair.base.start_ms})"
            )
        text = base_seg.text
        for camera, other in pair.others:
            if other is None:
                continue
            seg = by_key.get((camera, other.clip_id))
            if seg is not None and not seg.skipped and seg.text:
                text = f"{text} {seg.text}"
        entries.append(
            DocumentEntry(start_ms=pair.base.start_ms, end_ms=pair.base.end_ms, text=text)
        )
    return IntersectionDocument(entries=tuple(entries))


def compare_modes(
    feeds: list[CameraFeedManifest],
    baseline_cfg: IngestionConfig,
    trafficlens_cfg: IngestionConfig,
    make_backend,
) -> SpeedupSummary:
    """Run both modes on the same feeds with fresh backends and report the
    simulated-latency ratio."""
    baseline = ingest(feeds, baseline_cfg, make_backend())
    accelerated = ingest(feeds, trafficlens_cfg, make_backend())
    if accelerated.total_latency_ms > 0:
        ratio = baseline.total_latency_ms / accelerated.total_latency_ms
    else:
        ratio = float("inf")
    return SpeedupSummary(
        baseline_ms=baseline.total_latency_ms,
        trafficlens_ms=accelerated.total_latency_ms,
        ratio=ratio,
    )


def report_to_dict(report: IngestionReport) -> dict:
    """JSON-ready view of a report: config echo, totals, document, segments."""
    cfg = report.config
    return {
        "config": {
            "mode": cfg.mode,
            "base_camera": cfg.base_camera,
            "camera_order": list(cfg.camera_order),
            "t_r": cfg.schedule.base_limit,
            "t_l": cfg.schedule.followup_limit,
            "baseline_limit": cfg.schedule.baseline_limit,
            "delta": cfg.similarity.delta,
            "accumulation": cfg.accumulation.mode,
            "workers": cfg.workers,
        },
        "totals": {
            "total_latency_ms": report.total_latency_ms,
            "vlm_calls": report.vlm_calls,
            "skipped_clips": report.skipped_clips,
            "wall_ms": report.wall_ms,
        },
        "document": [
            {"start_ms": e.start_ms, "end_ms": e.end_ms, "text": e.text}
            for e in report.document.entries
        ],
        "segments": [
            {
                "clip_id": s.clip_id,
                "camera": s.camera,
                "role": s.role,
                "text": s.text,
                "prompt_tokens": s.prompt_tokens,
                "output_tokens": s.output_tokens,
                "latency_ms": s.latency_ms,
                "skipped": s.skipped,
                "error": s.error,
            }
            for s in report.segments
        ],
        "errors": [
            {"camera": e.camera, "clip_id": e.clip_id, "message": e.message}
            for e in report.errors
        ],
    }


def write_report(report: IngestionReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_document(path: str | Path) -> IntersectionDocument:
    """Rehydrate just the document from a written report file."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = tuple(
        DocumentEntry(start_ms=e["start_ms"], end_ms=e["end_ms"], text=e["text"])
        for e in data["document"]
    )
    return IntersectionDocument(entries=entries)
