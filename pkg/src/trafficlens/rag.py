"""Chunk the intersection document, embed and index the chunks, retrieve by
cosine similarity, and assemble the answer prompt.

The index is an exact scan: at desk scale (well under 1e5 chunks) there is
no reason to trade exactness for approximate neighbors.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from trafficlens.gateway import Backend, ModelUsage
from trafficlens.types import IntersectionDocument, format_timestamp

DEFAULT_CHUNK_CHARS = 1200
DEFAULT_TOP_K = 4

ANSWER_PROMPT_TEMPLATE = (
    "Context:\n{context}\n\nQuestion: {query}\nAnswer using only the context."
)

_SENTENCE_BOUNDARY_RE = re.compile(r"(?<=[.!?])\s+")


class EmptyDocumentError(ValueError):
    """Chunking needs a document with at least one entry."""


class EmptyIndexError(ValueError):
    """Retrieval needs an index with at least one entry."""


class IndexFormatError(ValueError):
    """A persisted index file did not match the expected layout."""


@dataclass
class KnowledgeChunk:
    """An embeddable slice of the document with its source time range."""

    chunk_id: int
    text: str
    start_ms: int
    end_ms: int
    embedding: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("chunk text must be non-empty")
        if self.start_ms > self.end_ms:
            raise ValueError(f"chunk time range invalid: [{self.start_ms}, {self.end_ms}]")

    def render(self) -> str:
        return f"{format_timestamp(self.start_ms)} :\n{self.text}"


@dataclass(frozen=True)
class RetrievalResult:
    chunk: KnowledgeChunk
    score: float


@dataclass(frozen=True)
class AnswerResult:
    answer_text: str
    used_chunks: tuple[RetrievalResult, ...]
    usage: ModelUsage


class VectorIndex:
    """Ordered store of L2-normalized chunk embeddings with exact search."""

    def __init__(self, dimension: int, chunks: list[KnowledgeChunk] | None = None) -> None:
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.chunks: list[KnowledgeChunk] = []
        for chunk in chunks or []:
            self.add(chunk)

    def add(self, chunk: KnowledgeChunk) -> None:
        if chunk.embedding is None:
            raise ValueError(f"chunk {chunk.chunk_id} has no embedding")
        if chunk.embedding.shape != (self.dimension,):
            raise ValueError(
                f"chunk {chunk.chunk_id} embedding has shape {chunk.embedding.shape}, "
                f"expected ({self.dimension},)"
            )
        self.chunks.append(chunk)

    def __len__(self) -> int:
        return len(self.chunks)


def _split_sentences(text: str) -> list[str]:
    """Slice text at sentence boundaries so the pieces concatenate back to
    the original text exactly (whitespace stays with the preceding piece)."""
    pieces = []
    start = 0
    for match in _SENTENCE_BOUNDARY_RE.finditer(text):
        pieces.append(text[start : match.end()])
        start = match.end()
    if start < len(text):
        pieces.append(text[start:])
    return pieces or [text]


def chunk_document(
    doc: IntersectionDocument, max_chars: int = DEFAULT_CHUNK_CHARS
) -> list[KnowledgeChunk]:
    """One chunk per document entry; oversize entries split at sentence
    boundaries into consecutive chunks sharing the entry's time range."""
    if max_chars < 1:
        raise ValueError("max_chars must be positive")
    if not doc.entries:
        raise EmptyDocumentError("document has no entries to chunk")

    chunks: list[KnowledgeChunk] = []
    next_id = 0
    for entry in doc.entries:
        if len(entry.text) <= max_chars:
            parts = [entry.text]
        else:
            parts = []
            buffer = ""
            for sentence in _split_sentences(entry.text):
                if buffer and len(buffer) + len(sentence) > max_chars:
                    parts.append(buffer)
                    buffer = sentence
                else:
                    buffer += sentence
            if buffer:
                parts.append(buffer)
        for part in parts:
            chunks.append(
                KnowledgeChunk(
                    chunk_id=next_id,
                    text=part,
                    start_ms=entry.start_ms,
                    end_ms=entry.end_ms,
                )
            )
            next_id += 1
    return chunks


def build_index(chunks: list[KnowledgeChunk], backend: Backend) -> VectorIndex:
    """Embed every chunk and insert in chunk order."""
    if not chunks:
        raise ValueError("cannot build an index from zero chunks")
    index: VectorIndex | None = None
    for chunk in chunks:
        try:
            vec = np.asarray(backend.embed(chunk.text), dtype=np.float64)
        except Exception as exc:
            raise type(exc)(f"embedding chunk {chunk.chunk_id} failed: {exc}") from exc
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec = vec / norm
        chunk.embedding = vec
        if index is None:
            index = VectorIndex(dimension=vec.shape[0])
        index.add(chunk)
    assert index is not None
    return index


def _exact_dot(a: np.ndarray, b: np.ndarray) -> Fraction:
    # Fraction(float) is exact, so this is the true rational dot product of
    # the stored values, independent of summation order.
    total = Fraction(0)
    for x, y in zip(a.tolist(), b.tolist()):
        if x != 0.0 and y != 0.0:
            total += Fraction(x) * Fraction(y)
    return total


_NEAR_TIE = 1e-9


def retrieve(query: str, index: VectorIndex, backend: Backend, k: int = DEFAULT_TOP_K) -> list[RetrievalResult]:
    """Exact top-k chunks by cosine similarity; ties go to earlier start times.

    Mathematically tied scores can round differently depending on summation
    order, so runs of near-equal scores are re-ranked with exact rational
    arithmetic; only then does the (start_ms, chunk_id) tie rule apply. The
    raw query embedding is used there because positive scaling cannot change
    a dot-product ranking.
    """
    if len(index) == 0:
        raise EmptyIndexError("index has no entries")
    if k < 1:
        raise ValueError("k must be positive")
    raw_query = np.asarray(backend.embed(query), dtype=np.float64)
    norm = np.linalg.norm(raw_query)
    query_vec = raw_query / norm if norm > 0 else raw_query
    chunks = index.chunks
    matrix = np.stack([c.embedding for c in chunks])
    scores = matrix @ query_vec

    order = sorted(
        range(len(chunks)),
        key=lambda i: (-scores[i], chunks[i].start_ms, chunks[i].chunk_id),
    )

    def resolve(group: list[int]) -> list[int]:
        if len(group) < 2:
            return group
        return sorted(
            group,
            key=lambda i: (
                -_exact_dot(chunks[i].embedding, raw_query),
                chunks[i].start_ms,
                chunks[i].chunk_id,
            ),
        )

    refined: list[int] = []
    group = [order[0]]
    for idx in order[1:]:
        if scores[group[-1]] - scores[idx] <= _NEAR_TIE:
            group.append(idx)
        else:
            refined.extend(resolve(group))
            group = [idx]
    refined.extend(resolve(group))

    return [
        RetrievalResult(chunk=chunks[i], score=float(scores[i]))
        for i in refined[:k]
    ]


def answer(
    query: str,
    index: VectorIndex,
    backend: Backend,
    k: int = DEFAULT_TOP_K,
    max_output_tokens: int = 256,
) -> AnswerResult:
    """Retrieve context, build the answer prompt, and run the completion."""
    results = retrieve(query, index, backend, k=k)
    context = "\n".join(r.chunk.render() for r in results)
    prompt = ANSWER_PROMPT_TEMPLATE.format(context=context, query=query)
    text, usage = backend.complete(prompt, max_output_tokens)
    return AnswerResult(answer_text=text, used_chunks=tuple(results), usage=usage)


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Persist as one header line {"dim":...,"count":...} plus one JSON
    record per entry, newline-delimited UTF-8."""
    lines = [json.dumps({"dim": index.dimension, "count": len(index)}, separators=(",", ":"))]
    for chunk in index.chunks:
        assert chunk.embedding is not None
        lines.append(
            json.dumps(
                {
                    "id": chunk.chunk_id,
                    "start_ms": chunk.start_ms,
                    "end_ms": chunk.end_ms,
                    "text": chunk.text,
                    "vec": chunk.embedding.tolist(),
                },
                separators=(",", ":"),
                ensure_ascii=False,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_index(path: str | Path) -> VectorIndex:
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.split("\n") if line]
    if not lines:
        raise IndexFormatError(f"{path}: empty index file")
    try:
        header = json.loads(lines[0])
        dim, count = header["dim"], header["count"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise IndexFormatError(f"{path}: bad header line: {exc}") from exc
    if count != len(lines) - 1:
        raise IndexFormatError(
            f"{path}: header says {count} entries, file has {len(lines) - 1}"
        )
    index = VectorIndex(dimension=dim)
    for line_no, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
            chunk = KnowledgeChunk(
                chunk_id=rec["id"],
                text=rec["text"],
                start_ms=rec["start_ms"],
                end_ms=rec["end_ms"],
                embedding=np.asarray(rec["vec"], dtype=np.float64),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise IndexFormatError(f"{path}: line {line_no}: {exc}") from exc
        index.add(chunk)
    return index
