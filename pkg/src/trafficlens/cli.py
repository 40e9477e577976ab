"""Command-line front door.

Subcommands cover the full pipeline: ingest camera manifests into a
document, index the document for retrieval, query it, benchmark the
accelerated mode against the baseline, sweep the skip threshold, and
write synthetic fixture manifests.

Exit codes: 0 success, 2 configuration problem, 3 unreadable or invalid
input, 4 backend failure. With the mock backend and a fixed seed, stdout
is byte-deterministic; wall-clock timing never reaches stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

from trafficlens.evalkit import delta_sweep, format_sweep_table
from trafficlens.frontend import (
    CameraFeedManifest,
    EmptyFeedError,
    ManifestError,
    load_manifest,
)
from trafficlens.gateway import (
    ENDPOINT_ENV,
    TOKEN_ENV,
    Backend,
    BackendError,
    HttpBackend,
    MockBackend,
)
from trafficlens.orchestrator import (
    IngestionConfig,
    MissingBaseSegmentError,
    MissingCameraError,
    compare_modes,
    ingest,
    load_document,
    write_report,
)
from trafficlens.rag import (
    DEFAULT_CHUNK_CHARS,
    EmptyDocumentError,
    EmptyIndexError,
    IndexFormatError,
    answer,
    build_index,
    chunk_document,
    load_index,
    save_index,
)
from trafficlens.synthetic import standard_fixture, write_fixture
from trafficlens.types import SimilarityConfig, TokenBudgetSchedule, format_timestamp


class ConfigError(ValueError):
    """Bad flag value, bad config file, or an inconsistent combination."""


DEFAULTS: dict[str, object] = {
    "mode": "trafficlens",
    "base_camera": None,
    "t_r": 80,
    "t_l": 32,
    "baseline_limit": 256,
    "delta": 0.21,
    "k": 4,
    "workers": 1,
    "backend": "mock",
    "endpoint": None,
    "model": "default",
    "seed": 0,
}

# Raised by readers and pipeline stages when the problem is the data,
# not the configuration. JSONDecodeError must outrank the ValueError
# catch because it subclasses it.
INPUT_ERRORS = (
    ManifestError,
    EmptyFeedError,
    MissingCameraError,
    MissingBaseSegmentError,
    IndexFormatError,
    EmptyDocumentError,
    EmptyIndexError,
    json.JSONDecodeError,
    FileNotFoundError,
)


def _settings_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, metavar="FILE",
                   help="JSON settings file; explicit flags override it")
    p.add_argument("--mode", choices=["trafficlens", "baseline"], default=None,
                   help="ingestion mode (default trafficlens)")
    p.add_argument("--base-camera", dest="base_camera", default=None,
                   help="camera whose clips anchor each window (default: first manifest)")
    p.add_argument("--t-r", dest="t_r", type=int, default=None,
                   help="token budget for base-clip calls (default 80)")
    p.add_argument("--t-l", dest="t_l", type=int, default=None,
                   help="token budget for follow-up calls (default 32)")
    p.add_argument("--baseline-limit", dest="baseline_limit", type=int, default=None,
                   help="token budget used by baseline mode (default 256)")
    p.add_argument("--delta", type=float, default=None,
                   help="similarity threshold at or above which follow-ups are skipped (default 0.21)")
    p.add_argument("--k", type=int, default=None, help="retrieval depth (default 4)")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel clip workers (default 1)")
    p.add_argument("--backend", choices=["mock", "http"], default=None,
                   help="model backend (default mock)")
    p.add_argument("--endpoint", default=None,
                   help=f"http backend URL (or set {ENDPOINT_ENV})")
    p.add_argument("--model", default=None, help="model name for the http backend")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for synthetic fixtures (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficlens",
        description="Multi-camera intersection ingestion and question answering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="turn camera manifests into a timestamped document")
    p.add_argument("--manifest", action="append", required=True, metavar="PATH",
                   help="camera feed manifest (repeat once per camera; first is the base)")
    p.add_argument("--out", required=True, metavar="DIR",
                   help="directory for document.txt and report.json")
    _settings_flags(p)

    p = sub.add_parser("index", help="embed a document's chunks into a vector index")
    p.add_argument("--report", required=True, metavar="FILE",
                   help="report.json written by ingest")
    p.add_argument("--out", required=True, metavar="FILE", help="index file to write")
    p.add_argument("--chunk-chars", dest="chunk_chars", type=int,
                   default=DEFAULT_CHUNK_CHARS,
                   help=f"chunk size ceiling in characters (default {DEFAULT_CHUNK_CHARS})")
    _settings_flags(p)

    p = sub.add_parser("query", help="answer a question against an index")
    p.add_argument("--index", required=True, metavar="FILE", help="index file from `index`")
    p.add_argument("--question", required=True, help="natural-language question")
    _settings_flags(p)

    p = sub.add_parser("bench", help="compare baseline and accelerated latency on the synthetic fixture")
    p.add_argument("--clips", type=int, default=200,
                   help="clip windows in the fixture (default 200)")
    _settings_flags(p)

    p = sub.add_parser("sweep", help="run the accelerated mode across a threshold grid")
    p.add_argument("--deltas", required=True,
                   help="comma-separated ascending thresholds, e.g. 0.1,0.3,0.5")
    p.add_argument("--clips", type=int, default=200,
                   help="clip windows in the fixture (default 200)")
    _settings_flags(p)

    p = sub.add_parser("synth", help="write synthetic fixture manifests")
    p.add_argument("--out", required=True, metavar="DIR", help="directory for per-camera manifests")
    p.add_argument("--clips", type=int, default=200,
                   help="clip windows in the fixture (default 200)")
    _settings_flags(p)

    return parser


def _load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return data


def _merge_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(_load_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _backend_factory(settings: dict) -> Callable[[], Backend]:
    if settings["backend"] == "mock":
        return MockBackend
    endpoint = settings["endpoint"] or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise ConfigError(f"http backend needs --endpoint or {ENDPOINT_ENV}")
    token = os.environ.get(TOKEN_ENV)
    model = str(settings["model"])
    return lambda: HttpBackend(endpoint=endpoint, model=model, token=token)


def _camera_order(
    feeds: list[CameraFeedManifest], base_camera: object
) -> tuple[str, tuple[str, ...]]:
    cams = [f.camera for f in feeds]
    seen = set()
    for cam in cams:
        if cam in seen:
            raise ManifestError(0, f"camera {cam!r} appears in more than one manifest")
        seen.add(cam)
    if base_camera is None:
        return cams[0], tuple(cams)
    if base_camera not in cams:
        raise ConfigError(f"base camera {base_camera!r} not among feeds {cams}")
    return str(base_camera), (str(base_camera), *(c for c in cams if c != base_camera))


def _ingestion_config(settings: dict, base: str, order: tuple[str, ...], mode: str) -> IngestionConfig:
    return IngestionConfig(
        base_camera=base,
        camera_order=order,
        mode=mode,  # type: ignore[arg-type]
        schedule=TokenBudgetSchedule(
            base_limit=int(settings["t_r"]),
            followup_limit=int(settings["t_l"]),
            baseline_limit=int(settings["baseline_limit"]),
        ),
        similarity=SimilarityConfig(delta=float(settings["delta"])),
        workers=int(settings["workers"]),
    )


def cmd_ingest(args: argparse.Namespace, settings: dict) -> int:
    feeds = [load_manifest(p) for p in args.manifest]
    base, order = _camera_order(feeds, settings["base_camera"])
    cfg = _ingestion_config(settings, base, order, str(settings["mode"]))
    report = ingest(feeds, cfg, _backend_factory(settings)())
    if report.errors and report.vlm_calls == 0:
        # isolated clip failures are reported and tolerated; a backend that
        # never produced anything is a hard failure
        print(
            f"error: backend failed on all {len(report.errors)} clip windows: "
            f"{report.errors[0].message}",
            file=sys.stderr,
        )
        return 4

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "document.txt").write_text(report.document.render() + "\n", encoding="utf-8")
    write_report(report, out / "report.json")

    print(f"document entries: {len(report.document.entries)}")
    print(f"vlm calls: {report.vlm_calls}")
    print(f"skipped clips: {report.skipped_clips}")
    print(f"clip errors: {len(report.errors)}")
    print(f"total latency ms: {report.total_latency_ms}")
    return 0


def cmd_index(args: argparse.Namespace, settings: dict) -> int:
    doc = load_document(args.report)
    chunks = chunk_document(doc, max_chars=args.chunk_chars)
    index = build_index(chunks, _backend_factory(settings)())
    save_index(index, args.out)
    print(f"indexed chunks: {len(index)}")
    print(f"dim: {index.dimension}")
    return 0


def cmd_query(args: argparse.Namespace, settings: dict) -> int:
    index = load_index(args.index)
    result = answer(args.question, index, _backend_factory(settings)(), k=int(settings["k"]))
    print(result.answer_text)
    print("sources:")
    for r in result.used_chunks:
        print(f"  {format_timestamp(r.chunk.start_ms)}")
    return 0


def cmd_bench(args: argparse.Namespace, settings: dict) -> int:
    feeds = standard_fixture(seed=int(settings["seed"]), clips=args.clips)
    base, order = _camera_order(feeds, settings["base_camera"])
    baseline_cfg = _ingestion_config(settings, base, order, "baseline")
    accelerated_cfg = replace(baseline_cfg, mode="trafficlens")
    summary = compare_modes(feeds, baseline_cfg, accelerated_cfg, _backend_factory(settings))
    if summary.baseline_ms == 0 and summary.trafficlens_ms == 0:
        # every call carries fixed overhead, so zero latency on both sides
        # means no model call ever succeeded
        print("error: no model call succeeded in either mode", file=sys.stderr)
        return 4
    print(f"baseline ms: {summary.baseline_ms}")
    print(f"trafficlens ms: {summary.trafficlens_ms}")
    print(f"speedup: {summary.ratio:.2f}")
    return 0


def cmd_sweep(args: argparse.Namespace, settings: dict) -> int:
    try:
        deltas = [float(part) for part in args.deltas.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"--deltas must be comma-separated numbers: {args.deltas!r}") from exc
    if not deltas:
        raise ConfigError("--deltas names no thresholds")
    if deltas != sorted(deltas):
        raise ConfigError(f"--deltas must ascend: {args.deltas!r}")

    feeds = standard_fixture(seed=int(settings["seed"]), clips=args.clips)
    base, order = _camera_order(feeds, settings["base_camera"])
    cfg = _ingestion_config(settings, base, order, "trafficlens")
    points = delta_sweep(feeds, cfg, deltas, _backend_factory(settings))
    if all(p.processed_clips == 0 for p in points):
        print("error: no model call succeeded at any threshold", file=sys.stderr)
        return 4
    print(format_sweep_table(points))
    return 0


def cmd_synth(args: argparse.Namespace, settings: dict) -> int:
    manifests = standard_fixture(seed=int(settings["seed"]), clips=args.clips)
    for path in write_fixture(manifests, args.out):
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "index": cmd_index,
    "query": cmd_query,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
}


def entrypoint(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 2

    try:
        settings = _merge_settings(args)
        return _COMMANDS[args.command](args, settings)
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    raise SystemExit(entrypoint())


if __name__ == "__main__":
    main()
