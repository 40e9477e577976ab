"""Pluggable frame detectors.

A detector maps one BGR frame to (label, box, confidence) triples with
pixel-coordinate boxes and confidences in [0, 1]. Labels are lowercase
singular nouns so label-matched IoU downstream stays stable.
"""

from __future__ import annotations

from typing import Protocol

import cv2
import numpy as np

RawDetection = tuple[str, tuple[float, float, float, float], float]


class DetectorLoadError(RuntimeError):
    """The named detector does not exist or failed to initialize."""


class Detector(Protocol):
    name: str

    def detect(self, frame_bgr: np.ndarray) -> list[RawDetection]: ...


class MotionDetector:
    """Foreground finder backed by MOG2 background subtraction.

    Stateful across calls: every frame updates the background model, so a
    detection means "changed versus the recent frames". The first frame only
    primes the model and yields nothing.
    """

    name = "motion"

    def __init__(self, min_area: float = 80.0) -> None:
        self._min_area = min_area
        self._primed = False
        try:
            self._subtractor = cv2.createBackgroundSubtractorMOG2(detectShadows=True)
        except (cv2.error, AttributeError) as exc:
            raise DetectorLoadError(f"motion failed to initialize: {exc}") from exc

    def detect(self, frame_bgr: np.ndarray) -> list[RawDetection]:
        mask = self._subtractor.apply(frame_bgr)
        if not self._primed:
            self._primed = True
            return []
        # MOG2 marks shadows at 127; keep only definite foreground
        _, mask = cv2.threshold(mask, 200, 255, cv2.THRESH_BINARY)
        contours, _ = cv2.findContours(mask, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
        detections: list[RawDetection] = []
        for contour in contours:
            x, y, w, h = cv2.boundingRect(contour)
            area = float(w * h)
            if area < self._min_area:
                continue
            conf = min(1.0, 0.5 + area / 2000.0)
            detections.append(
                ("object", (float(x), float(y), float(x + w), float(y + h)), conf)
            )
        detections.sort(key=lambda d: (d[1][0], d[1][1]))
        return detections


class ContourDetector:
    """Bright-blob finder: threshold, contour, bounding box.

    Not a classifier, so every blob is labeled "object"; confidence grows
    with blob area. Deterministic, which makes it the reference detector
    for synthetic footage.
    """

    name = "contour"

    def __init__(self, threshold: int = 40, min_area: float = 80.0) -> None:
        self._threshold = threshold
        self._min_area = min_area

    def detect(self, frame_bgr: np.ndarray) -> list[RawDetection]:
        gray = cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2GRAY)
        _, mask = cv2.threshold(gray, self._threshold, 255, cv2.THRESH_BINARY)
        contours, _ = cv2.findContours(mask, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
        detections: list[RawDetection] = []
        for contour in contours:
            x, y, w, h = cv2.boundingRect(contour)
            area = float(w * h)
            if area < self._min_area:
                continue
            conf = min(1.0, 0.5 + area / 2000.0)
            detections.append(
                ("object", (float(x), float(y), float(x + w), float(y + h)), conf)
            )
        # stable output order regardless of contour traversal order
        detections.sort(key=lambda d: (d[1][0], d[1][1]))
        return detections


_REGISTRY = {
    MotionDetector.name: MotionDetector,
    ContourDetector.name: ContourDetector,
}


def available_detectors() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def make_detector(name: str) -> Detector:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise DetectorLoadError(
            f"unknown detector {name!r}; available: {', '.join(available_detectors())}"
        ) from None
    return factory()
