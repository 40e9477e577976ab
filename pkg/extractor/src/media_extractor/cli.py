"""Command-line runner: one video to one manifest.

Exit codes: 0 success, 2 bad configuration, 3 unreadable or undecodable
input.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from media_extractor.detectors import DetectorLoadError, available_detectors
from media_extractor.extract import UndecodableVideoError, extract
from media_extractor.job import (
    DEFAULT_DETECTOR,
    DEFAULT_MIN_CONFIDENCE,
    ExtractionJob,
)


def _parse_rate(value: str) -> float:
    """Accept a float ("0.5") or a fraction ("1/3")."""
    try:
        if "/" in value:
            num, den = value.split("/", 1)
            return float(num) / float(den)
        return float(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad rate {value!r}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="media-extractor",
        description="Sample a video, run a detector, and write a camera manifest.",
    )
    parser.add_argument("--video", required=True, help="input video file")
    parser.add_argument("--camera", required=True, help="camera id stamped on every record")
    parser.add_argument("--out", required=True, metavar="DIR",
                        help="output directory for manifest.jsonl, summary.json, frames/")
    parser.add_argument("--rate", type=_parse_rate, default="1/3",
                        help="sampling rate in Hz; accepts fractions (default 1/3)")
    parser.add_argument("--detector", default=DEFAULT_DETECTOR,
                        choices=available_detectors(),
                        help=f"detector to run (default {DEFAULT_DETECTOR})")
    parser.add_argument("--min-conf", dest="min_conf", type=float,
                        default=DEFAULT_MIN_CONFIDENCE,
                        help=f"confidence floor (default {DEFAULT_MIN_CONFIDENCE})")
    return parser


def entrypoint(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 2

    try:
        job = ExtractionJob(
            video_path=args.video,
            camera_id=args.camera,
            output_dir=args.out,
            sample_rate_hz=args.rate,
            detector=args.detector,
            min_confidence=args.min_conf,
        )
        result = extract(job)
    except (UndecodableVideoError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DetectorLoadError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(f"wrote {result.manifest_path}")
    print(f"records: {result.records}")
    print(f"detections: {result.detections}")
    print(f"duration ms: {result.duration_ms}")
    return 0


def main() -> None:
    raise SystemExit(entrypoint())


if __name__ == "__main__":
    main()
