"""Uniform interface to vision description, text embedding, and completion.

Two implementations: an OpenAI-compatible chat-completions HTTP client, and
a deterministic mock whose simulated latency grows linearly with output
tokens (accounted on a logical clock, never slept). The mock makes speedup
experiments reproducible to the millisecond without a GPU.
"""

from __future__ import annotations

import base64
import math
import mimetypes
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import requests

from trafficlens.prompts import FOLLOWUP_PREFIX, FOLLOWUP_SUFFIX, PromptText
from trafficlens.types import Detection

EMBED_DIM = 256

ENDPOINT_ENV = "TRAFFICLENS_ENDPOINT"
TOKEN_ENV = "TRAFFICLENS_TOKEN"

# Query words carrying no content, ignored by the mock answerer so that a
# question sharing only function words with the context yields "no info".
_STOPWORDS = frozenset(
    "a an the is are was were there any in on at of and or to with it its "
    "this that do does did what which who whom how many much".split()
)

_WORD_RE = re.compile(r"[a-z0-9]+")
_TIMESTAMP_PREFIX_RE = re.compile(r"\b\d{2,}:\d{2}:\d{2} :\s*")


class BackendError(RuntimeError):
    """The backend answered with a failure status."""

    def __init__(self, message: str, status: int | None = None, body: str | None = None):
        super().__init__(message)
        self.status = status
        self.body = body


class BackendUnreachableError(BackendError):
    """The backend could not be reached at all (connect failure, timeout)."""


class EmptyTextError(ValueError):
    """Embedding requires text with at least one alphanumeric token."""


@dataclass(frozen=True)
class ModelUsage:
    """Token and latency accounting for one model call."""

    prompt_tokens: int = 0
    output_tokens: int = 0
    latency_ms: int = 0

    def __post_init__(self) -> None:
        if min(self.prompt_tokens, self.output_tokens, self.latency_ms) < 0:
            raise ValueError("usage counters must be non-negative")


@dataclass(frozen=True)
class MockLatencyModel:
    """Affine latency: fixed overhead plus a per-output-token cost."""

    fixed_overhead_ms: int = 500
    ms_per_token: float = 50.0

    def __post_init__(self) -> None:
        if self.fixed_overhead_ms < 0:
            raise ValueError("fixed_overhead_ms must be non-negative")
        if self.ms_per_token <= 0:
            raise ValueError("ms_per_token must be positive")

    def latency_ms(self, output_tokens: int) -> int:
        return round(self.fixed_overhead_ms + self.ms_per_token * output_tokens)


@dataclass(frozen=True)
class DescribeRequest:
    """One vision call: what to look at, what to ask, how much to say.

    media_ref locates the frame image for HTTP backends; detections carry
    the same content inline for the mock path.
    """

    prompt: PromptText
    max_output_tokens: int
    media_ref: str | None = None
    detections: tuple[Detection, ...] = ()

    def __post_init__(self) -> None:
        if self.max_output_tokens < 1:
            raise ValueError(f"max_output_tokens must be >= 1: {self.max_output_tokens}")


@dataclass(frozen=True)
class RequestRecord:
    """What the mock was asked, kept for budget and prompt assertions."""

    kind: str
    role: str
    max_output_tokens: int
    prompt_text: str


class Backend(Protocol):
    def describe(self, req: DescribeRequest) -> tuple[str, ModelUsage]: ...

    def embed(self, text: str) -> np.ndarray: ...

    def complete(self, prompt: str, max_output_tokens: int) -> tuple[str, ModelUsage]: ...


class UsageLedger:
    """Serialized running record of per-call usage."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: list[ModelUsage] = []

    def record(self, usage: ModelUsage) -> None:
        with self._lock:
            self._entries.append(usage)

    @property
    def entries(self) -> list[ModelUsage]:
        with self._lock:
            return list(self._entries)

    @property
    def calls(self) -> int:
        with self._lock:
            return len(self._entries)

    @property
    def total_output_tokens(self) -> int:
        with self._lock:
            return sum(u.output_tokens for u in self._entries)

    @property
    def total_latency_ms(self) -> int:
        with self._lock:
            return sum(u.latency_ms for u in self._entries)

    @property
    def avg_output_tokens(self) -> float:
        with self._lock:
            if not self._entries:
                return 0.0
            return sum(u.output_tokens for u in self._entries) / len(self._entries)


def _fnv1a(token: str) -> int:
    h = 2166136261
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * 16777619) & 0xFFFFFFFF
    return h


def hash_embedding(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """L2-normalized hashed term-frequency vector over alphanumeric tokens."""
    if not text:
        raise EmptyTextError("cannot embed empty text")
    tokens = _WORD_RE.findall(text.lower())
    if not tokens:
        raise EmptyTextError("text has no alphanumeric tokens to embed")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        vec[_fnv1a(token) % dim] += 1.0
    return vec / np.linalg.norm(vec)


def _truncate_tokens(text: str, budget: int) -> str:
    tokens = text.split()
    if len(tokens) <= budget:
        return text
    return " ".join(tokens[:budget])


def _words(text: str) -> set[str]:
    return set(_WORD_RE.findall(text.lower()))


class MockBackend:
    """Deterministic stand-in for the vision/LLM services.

    Narratives are a pure function of (detections, prompt role, prompt text,
    budget); identical inputs give byte-identical text on every run and
    platform. Safe to call from multiple workers: the only mutable state is
    the request log, which appends under a lock.
    """

    def __init__(self, latency: MockLatencyModel | None = None) -> None:
        self.latency = latency or MockLatencyModel()
        self._lock = threading.Lock()
        self._requests: list[RequestRecord] = []

    @property
    def requests(self) -> list[RequestRecord]:
        with self._lock:
            return list(self._requests)

    def describe_requests(self) -> list[RequestRecord]:
        return [r for r in self.requests if r.kind == "describe"]

    def _record(self, record: RequestRecord) -> None:
        with self._lock:
            self._requests.append(record)

    def describe(self, req: DescribeRequest) -> tuple[str, ModelUsage]:
        self._record(
            RequestRecord(
                kind="describe",
                role=req.prompt.role,
                max_output_tokens=req.max_output_tokens,
                prompt_text=req.prompt.text,
            )
        )
        if req.prompt.role == "followup":
            narrative = self._followup_narrative(req.detections, req.prompt.text)
        else:
            narrative = self._base_narrative(req.detections)
        text = _truncate_tokens(narrative, req.max_output_tokens)
        return text, self._usage(req.prompt.text, text)

    def _usage(self, prompt_text: str, output_text: str) -> ModelUsage:
        out_tokens = len(output_text.split())
        return ModelUsage(
            prompt_tokens=len(prompt_text.split()),
            output_tokens=out_tokens,
            latency_ms=self.latency.latency_ms(out_tokens),
        )

    @staticmethod
    def _sentences_for(detections: Sequence[Detection]) -> list[str]:
        ordered = sorted(
            detections,
            key=lambda d: (d.label.lower(), d.label, d.box.center[0], d.box.center[1]),
        )
        out = []
        for det in ordered:
            cx, cy = det.box.center
            out.append(f"A {det.label} is visible near ({round(cx)},{round(cy)}).")
        return out

    def _base_narrative(self, detections: Sequence[Detection]) -> str:
        if not detections:
            return "The scene shows an empty road."
        return " ".join(self._sentences_for(detections))

    def _followup_narrative(self, detections: Sequence[Detection], prompt_text: str) -> str:
        context = prompt_text
        if prompt_text.startswith(FOLLOWUP_PREFIX) and prompt_text.endswith(FOLLOWUP_SUFFIX):
            context = prompt_text[len(FOLLOWUP_PREFIX) : -len(FOLLOWUP_SUFFIX)]
        mentioned = _words(context)
        novel = [
            det
            for det in detections
            if not all(w in mentioned for w in _WORD_RE.findall(det.label.lower()))
        ]
        if not novel:
            return "No additional objects are visible."
        return " ".join(self._sentences_for(novel))

    def embed(self, text: str) -> np.ndarray:
        return hash_embedding(text)

    def complete(self, prompt: str, max_output_tokens: int) -> tuple[str, ModelUsage]:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        if max_output_tokens < 1:
            raise ValueError(f"max_output_tokens must be >= 1: {max_output_tokens}")
        self._record(
            RequestRecord(
                kind="complete",
                role="answer",
                max_output_tokens=max_output_tokens,
                prompt_text=prompt,
            )
        )
        answer = self._extractive_answer(prompt)
        text = _truncate_tokens(answer, max_output_tokens)
        return text, self._usage(prompt, text)

    @staticmethod
    def _extractive_answer(prompt: str) -> str:
        context, query = prompt, prompt
        if "Question:" in prompt:
            head, _, tail = prompt.partition("Question:")
            query = tail.strip().splitlines()[0] if tail.strip() else ""
            context = head.partition("Context:")[2] or head
        terms = _words(query) - _STOPWORDS
        context = _TIMESTAMP_PREFIX_RE.sub("", context).replace("\n", " ")
        sentences = [s.strip() for s in re.split(r"(?<=[.!?])\s+", context) if s.strip()]
        scored = [(len(_words(s) & terms), s) for s in sentences]
        best = max((score for score, _ in scored), default=0)
        if best == 0 or not terms:
            return "No relevant information found."
        picked = [s for score, s in scored if score == best]
        return "Yes, " + " ".join(picked)


class HttpBackend:
    """Client for an OpenAI-compatible /v1/chat/completions subset.

    Only the fields model, max_tokens, and user messages with text plus
    image_url content are sent; the reply is read from
    choices[0].message.content and usage.completion_tokens. Embeddings use
    the same local hashed vectors as the mock, keeping indexes
    backend-independent.
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "default",
        token: str | None = None,
        timeout_s: float = 120.0,
        session: requests.Session | None = None,
    ) -> None:
        if not endpoint:
            raise ValueError("endpoint must be non-empty")
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.token = token
        self.timeout_s = timeout_s
        self.session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def _post_chat(self, messages: list[dict], max_tokens: int) -> tuple[str, ModelUsage]:
        payload = {"model": self.model, "max_tokens": max_tokens, "messages": messages}
        started = time.monotonic()
        try:
            resp = self.session.post(
                f"{self.endpoint}/v1/chat/completions",
                json=payload,
                headers=self._headers(),
                timeout=self.timeout_s,
            )
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise BackendUnreachableError(f"backend unreachable: {exc}") from exc
        elapsed_ms = round((time.monotonic() - started) * 1000)
        if not 200 <= resp.status_code < 300:
            raise BackendError(
                f"backend returned {resp.status_code}",
                status=resp.status_code,
                body=resp.text,
            )
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed backend response: {exc}", body=resp.text) from exc
        usage = data.get("usage") or {}
        return text, ModelUsage(
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            output_tokens=int(usage.get("completion_tokens", 0)),
            latency_ms=elapsed_ms,
        )

    @staticmethod
    def _image_part(media_ref: str) -> dict:
        if media_ref.startswith(("http://", "https://", "data:")):
            url = media_ref
        else:
            mime = mimetypes.guess_type(media_ref)[0] or "image/jpeg"
            with open(media_ref, "rb") as fh:
                payload = base64.b64encode(fh.read()).decode("ascii")
            url = f"data:{mime};base64,{payload}"
        return {"type": "image_url", "image_url": {"url": url}}

    def describe(self, req: DescribeRequest) -> tuple[str, ModelUsage]:
        if req.media_ref is None:
            raise BackendError("describe over HTTP requires a media_ref (frame image)")
        content = [
            {"type": "text", "text": req.prompt.text},
            self._image_part(req.media_ref),
        ]
        messages = [{"role": "user", "content": content}]
        return self._post_chat(messages, req.max_output_tokens)

    def embed(self, text: str) -> np.ndarray:
        return hash_embedding(text)

    def complete(self, prompt: str, max_output_tokens: int) -> tuple[str, ModelUsage]:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        messages = [{"role": "user", "content": prompt}]
        return self._post_chat(messages, max_output_tokens)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors; 0.0 when either has zero norm."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0 or math.isnan(na) or math.isnan(nb):
        return 0.0
    return float(np.dot(a, b) / (na * nb))
