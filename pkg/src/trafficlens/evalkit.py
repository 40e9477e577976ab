"""Measurement tooling: output-token statistics, cross-camera text
divergence via ROUGE-L, and the similarity-threshold sweep.

ROUGE-L tokenization is lowercase whitespace splitting with surrounding
punctuation stripped; divergence is averaged per clip pair. BERTScore needs
a contextual-embedding model and is out of scope; report columns print
"n/a" in its place.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

from trafficlens.frontend import CameraFeedManifest
from trafficlens.gateway import Backend, ModelUsage
from trafficlens.orchestrator import IngestionConfig, IngestionReport, ingest
from trafficlens.types import NarrativeSegment


class NoPairsError(ValueError):
    """Divergence needs at least one base/followup pair that was not skipped."""


@dataclass(frozen=True)
class TokenStats:
    max: int
    min: int
    avg: float


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class SweepPoint:
    delta: float
    total_latency_ms: int
    processed_clips: int
    skipped_clips: int


def token_stats(usages: Sequence[ModelUsage]) -> TokenStats:
    """Max/min/mean of output tokens over a list of calls."""
    if not usages:
        raise ValueError("token_stats needs at least one usage record")
    outputs = [u.output_tokens for u in usages]
    return TokenStats(max=max(outputs), min=min(outputs), avg=sum(outputs) / len(outputs))


def _rouge_tokens(text: str) -> list[str]:
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # Two-row dynamic program, O(len(a) * len(b)).
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for token_a in a:
        cur = [0]
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """LCS-based ROUGE-L; all components 0 when either side has no tokens."""
    cand = _rouge_tokens(candidate)
    ref = _rouge_tokens(reference)
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand) if cand else 0.0
    recall = lcs / len(ref) if ref else 0.0
    if precision + recall == 0.0:
        return RougeScore(precision=precision, recall=recall, f1=0.0)
    return RougeScore(
        precision=precision,
        recall=recall,
        f1=2.0 * precision * recall / (precision + recall),
    )


def divergence_report(
    base_segments: Sequence[NarrativeSegment],
    followup_segments: Sequence[NarrativeSegment],
) -> float:
    """Mean ROUGE-L f1 of follow-up text against its base text, per clip.

    Lower means cameras contributed more novel information.
    """
    if len(base_segments) != len(followup_segments):
        raise ValueError(
            f"segment lists must pair up: {len(base_segments)} vs {len(followup_segments)}"
        )
    scores = [
        rouge_l(followup.text, base.text).f1
        for base, followup in zip(base_segments, followup_segments)
        if not followup.skipped and not base.skipped
    ]
    if not scores:
        raise NoPairsError("no non-skipped base/followup pairs to compare")
    return sum(scores) / len(scores)


def segment_pairs(
    report: IngestionReport,
) -> tuple[list[NarrativeSegment], list[NarrativeSegment]]:
    """Extract aligned (base, followup) segment lists from a report, one
    pair per processed follow-up call."""
    by_key = {(s.camera, s.clip_id): s for s in report.segments}
    bases, followups = [], []
    for pair in report.pairs:
        base_seg = by_key.get((pair.base.camera, pair.base.clip_id))
        if base_seg is None:
            continue
        for camera, other in pair.others:
            if other is None:
                continue
            seg = by_key.get((camera, other.clip_id))
            if seg is not None:
                bases.append(base_seg)
                followups.append(seg)
    return bases, followups


def delta_sweep(
    feeds: list[CameraFeedManifest],
    cfg: IngestionConfig,
    deltas: Sequence[float],
    make_backend: Callable[[], Backend],
) -> list[SweepPoint]:
    """Run one full accelerated ingestion per threshold and collect totals.

    Each point gets a fresh backend so latency accounting is isolated.
    """
    if list(deltas) != sorted(deltas):
        raise ValueError(f"deltas must be sorted ascending: {list(deltas)}")
    points = []
    for delta in deltas:
        sweep_cfg = replace(cfg, mode="trafficlens", similarity=replace(cfg.similarity, delta=delta))
        report = ingest(feeds, sweep_cfg, make_backend())
        points.append(
            SweepPoint(
                delta=delta,
                total_latency_ms=report.total_latency_ms,
                processed_clips=report.vlm_calls,
                skipped_clips=report.skipped_clips,
            )
        )
    return points


def format_token_table(report: IngestionReport) -> str:
    """Tab-separated per-camera output-token statistics with the budget column."""
    lines = ["camera\tmax_token_limit\tmax_output\tmin_output\tavg_output"]
    cfg = report.config
    for rank, camera in enumerate(cfg.camera_order):
        usages = [
            ModelUsage(s.prompt_tokens, s.output_tokens, s.latency_ms)
            for s in report.segments
            if s.camera == camera and not s.skipped
        ]
        if not usages:
            continue
        stats = token_stats(usages)
        limit = (
            cfg.schedule.baseline_limit
            if cfg.mode == "baseline"
            else (cfg.schedule.base_limit if rank == 0 else cfg.schedule.followup_limit)
        )
        lines.append(f"{camera}\t{limit}\t{stats.max}\t{stats.min}\t{stats.avg:.2f}")
    return "\n".join(lines)


def format_divergence_table(method: str, mean_f1: float) -> str:
    """Tab-separated divergence row; BERTScore column intentionally n/a.

    Averaged per clip pair (noted here because a concatenated-document
    average would differ).
    """
    return (
        "method\tbert_score\trouge_l\n"
        f"{method}\tn/a\t{mean_f1:.4f}"
    )


def format_sweep_series(points: Iterable[SweepPoint]) -> str:
    """Two-column series (delta, total_latency_ms) for plotting."""
    lines = ["delta\ttotal_latency_ms"]
    for p in points:
        lines.append(f"{p.delta:.2f}\t{p.total_latency_ms}")
    return "\n".join(lines)


def format_sweep_table(points: Iterable[SweepPoint]) -> str:
    """Full sweep table with processed and skipped counts."""
    lines = ["delta\tprocessed_clips\tskipped_clips\ttotal_latency_ms"]
    for p in points:
        lines.append(
            f"{p.delta:.2f}\t{p.processed_clips}\t{p.skipped_clips}\t{p.total_latency_ms}"
        )
    return "\n".join(lines)
