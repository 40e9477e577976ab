"""Decode, sample, detect, and write the manifest.

Manifest records follow the engine's wire contract: one JSON object per
line with "camera", "ts_ms", "media", and "detections" (label, pixel box
[x_min, y_min, x_max, y_max], conf). Timestamps come from the frame index
and the container frame rate, so each sampled timestamp lands within one
source-frame period of its rate-grid target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import cv2

from media_extractor.detectors import make_detector
from media_extractor.job import ExtractionJob

FRAMES_SUBDIR = "frames"
MANIFEST_NAME = "manifest.jsonl"
SUMMARY_NAME = "summary.json"


class UndecodableVideoError(RuntimeError):
    """The video could not be opened or produced no frames."""


@dataclass(frozen=True)
class ExtractionResult:
    manifest_path: Path
    summary_path: Path
    frame_paths: tuple[Path, ...]
    records: int
    detections: int
    duration_ms: int


def _record_line(camera: str, ts_ms: int, media: str, detections: list) -> str:
    payload = {
        "camera": camera,
        "ts_ms": ts_ms,
        "media": media,
        "detections": [
            {"label": label, "box": [x0, y0, x1, y1], "conf": round(conf, 4)}
            for label, (x0, y0, x1, y1), conf in detections
        ],
    }
    return json.dumps(payload, separators=(",", ":")) + "\n"


def extract(job: ExtractionJob) -> ExtractionResult:
    """Run one job; returns paths and counts. Frame images land under
    ``<output_dir>/frames/``, referenced relatively from the manifest."""
    detector = make_detector(job.detector)

    out_dir = Path(job.output_dir)
    frames_dir = out_dir / FRAMES_SUBDIR
    frames_dir.mkdir(parents=True, exist_ok=True)

    capture = cv2.VideoCapture(str(job.video_path))
    try:
        if not capture.isOpened():
            raise UndecodableVideoError(f"cannot open video: {job.video_path}")
        fps = capture.get(cv2.CAP_PROP_FPS)
        if not fps or fps <= 0:
            raise UndecodableVideoError(f"video reports no frame rate: {job.video_path}")

        period_ms = job.frame_period_ms
        lines: list[str] = []
        frame_paths: list[Path] = []
        total_detections = 0
        frame_index = 0
        next_target_ms = 0.0
        while True:
            ok, frame = capture.read()
            if not ok:
                break
            t_ms = frame_index * 1000.0 / fps
            if t_ms + 1e-6 >= next_target_ms:
                image_name = f"{job.camera_id}_{len(frame_paths):06d}.jpg"
                image_path = frames_dir / image_name
                if not cv2.imwrite(str(image_path), frame):
                    raise OSError(f"failed to write frame image: {image_path}")
                detections = [
                    d for d in detector.detect(frame) if d[2] >= job.min_confidence
                ]
                lines.append(
                    _record_line(
                        job.camera_id,
                        round(t_ms),
                        f"{FRAMES_SUBDIR}/{image_name}",
                        detections,
                    )
                )
                frame_paths.append(image_path)
                total_detections += len(detections)
                next_target_ms += period_ms
            frame_index += 1
    finally:
        capture.release()

    if frame_index == 0:
        raise UndecodableVideoError(f"video decoded to zero frames: {job.video_path}")

    duration_ms = round(frame_index * 1000.0 / fps)
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text("".join(lines), encoding="utf-8")

    summary_path = out_dir / SUMMARY_NAME
    summary_path.write_text(
        json.dumps(
            {
                "camera": job.camera_id,
                "video": str(job.video_path),
                "detector": job.detector,
                "sample_rate_hz": job.sample_rate_hz,
                "frames": len(frame_paths),
                "detections": total_detections,
                "duration_ms": duration_ms,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    return ExtractionResult(
        manifest_path=manifest_path,
        summary_path=summary_path,
        frame_paths=tuple(frame_paths),
        records=len(frame_paths),
        detections=total_detections,
        duration_ms=duration_ms,
    )
