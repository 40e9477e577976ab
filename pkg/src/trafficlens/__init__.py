"""Multi-camera traffic video-to-text engine with a retrieval query path.

The package converts per-camera frame manifests into a timestamped text
document via sequential vision-language model calls (full budget for the
base camera, reduced budget for follow-up cameras, redundant clips skipped
by an IoU similarity detector), then indexes the document for
retrieval-augmented question answering.
"""

from trafficlens.types import (
    BoundingBox,
    ClipRecord,
    Detection,
    DocumentEntry,
    FrameRecord,
    IntersectionDocument,
    NarrativeSegment,
    SimilarityConfig,
    TokenBudgetSchedule,
    format_timestamp,
    validate_clip_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ClipRecord",
    "Detection",
    "DocumentEntry",
    "FrameRecord",
    "IntersectionDocument",
    "NarrativeSegment",
    "SimilarityConfig",
    "TokenBudgetSchedule",
    "format_timestamp",
    "validate_clip_sequence",
    "__version__",
]
