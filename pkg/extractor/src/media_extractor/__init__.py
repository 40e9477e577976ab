"""Turn video files into newline-delimited camera manifests.

The package decodes frames at a fixed sampling rate, runs an object
detector on each sampled frame, writes the frame image, and emits one
manifest record per frame in the exact wire format the ingestion engine
reads. The handoff is purely file-based; nothing here imports the engine.
"""

from media_extractor.detectors import DetectorLoadError, available_detectors, make_detector
from media_extractor.extract import ExtractionResult, UndecodableVideoError, extract
from media_extractor.job import ExtractionJob

__all__ = [
    "DetectorLoadError",
    "ExtractionJob",
    "ExtractionResult",
    "UndecodableVideoError",
    "available_detectors",
    "extract",
    "make_detector",
]
