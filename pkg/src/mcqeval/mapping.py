"""Map each MCQ to its most relevant textbook chunks.

Every item is represented by two queries: a metadata query built from its
domain and skill labels and a content query built from its stem and
rationale. Chunks are scored exhaustively (the corpus is small) with a
weighted combination of the two cosine similarities; ties break on
chunk_id so rankings are fully deterministic.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigError, MappingError
from .models import Chunk, MCQItem


@dataclass(frozen=True)
class MappingConfig:
    metadata_weight: float = 0.3
    content_weight: float = 0.7
    top_k: int = 1

    def validate(self) -> None:
        if self.metadata_weight < 0 or self.content_weight < 0:
            raise ConfigError("similarity weights must be non-negative")
        if abs(self.metadata_weight + self.content_weight - 1.0) > 1e-9:
            raise ConfigError("metadata_weight + content_weight must equal 1")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")


@dataclass(frozen=True)
class MappingEntry:
    chunk_id: str
    sim_metadata: float
    sim_content: float
    combined: float

    def to_record(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "sim_metadata": self.sim_metadata,
            "sim_content": self.sim_content,
            "combined": self.combined,
        }


@dataclass(frozen=True)
class MappingResult:
    question_id: str
    entries: tuple[MappingEntry, ...]

    @property
    def best_chunk_id(self) -> str:
        return self.entries[0].chunk_id

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "entries": [e.to_record() for e in self.entries],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "MappingResult":
        return cls(
            question_id=str(rec["question_id"]),
            entries=tuple(
                MappingEntry(
                    chunk_id=str(e["chunk_id"]),
                    sim_metadata=float(e["sim_metadata"]),
                    sim_content=float(e["sim_content"]),
                    combined=float(e["combined"]),
                )
                for e in rec["entries"]
            ),
        )


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    """Standard cosine similarity, clamped against rounding overshoot."""
    au = np.asarray(u, dtype=float)
    av = np.asarray(v, dtype=float)
    if au.ndim != 1 or av.ndim != 1 or au.shape != av.shape:
        raise MappingError(f"dimension mismatch: {au.shape} vs {av.shape}")
    if au.size < 1:
        raise MappingError("vectors must have dimension >= 1")
    nu = float(np.linalg.norm(au))
    nv = float(np.linalg.norm(av))
    if nu == 0.0 or nv == 0.0:
        raise MappingError("cosine similarity is undefined for a zero vector")
    return float(np.clip(float(au @ av) / (nu * nv), -1.0, 1.0))


def combined_score(sim_metadata: float, sim_content: float, cfg: MappingConfig) -> float:
    cfg.validate()
    for name, s in (("sim_metadata", sim_metadata), ("sim_content", sim_content)):
        if not (-1.0 - 1e-9 <= s <= 1.0 + 1e-9):
            raise MappingError(f"{name} out of [-1, 1]: {s}")
    return cfg.metadata_weight * sim_metadata + cfg.content_weight * sim_content


def build_queries(item: MCQItem) -> tuple[str, str]:
    """(metadata query, content query) for one item."""
    metadata_query = f"{item.metadata.domain}; {item.metadata.skill}"
    content_query = (
        f"{item.stem}\n{item.rationale}" if item.rationale else item.stem
    )
    return metadata_query, content_query


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class Embedder(Protocol):
    """Anything that can turn texts into fixed-dimension vectors."""

    backend_id: str

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class EmbeddingCache:
    """Disk-backed embedding cache keyed by (backend_id, content hash).

    Persisted as JSON Lines; floats round-trip exactly through JSON, so a
    cache hit returns bitwise-identical vectors.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._store: dict[tuple[str, str], list[float]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.path is not None and self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    self._store[(rec["backend_id"], rec["content_hash"])] = rec["vector"]

    def get(self, backend_id: str, text: str) -> list[float] | None:
        key = (backend_id, content_hash(text))
        with self._lock:
            vec = self._store.get(key)
            if vec is None:
                self.misses += 1
            else:
                self.hits += 1
            return vec

    def put(self, backend_id: str, text: str, vector: Sequence[float]) -> None:
        key = (backend_id, content_hash(text))
        record = {
            "backend_id": backend_id,
            "content_hash": key[1],
            "vector": list(float(x) for x in vector),
        }
        with self._lock:
            if key in self._store:
                return
            self._store[key] = record["vector"]
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record) + "\n")


class CachingEmbedder:
    """Wraps an embedder with the persistent cache."""

    def __init__(self, inner: Embedder, cache: EmbeddingCache) -> None:
        self.inner = inner
        self.cache = cache

    @property
    def backend_id(self) -> str:
        return self.inner.backend_id

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        out: list[list[float] | None] = []
        missing: list[str] = []
        for text in texts:
            vec = self.cache.get(self.backend_id, text)
            out.append(vec)
            if vec is None:
                missing.append(text)
        if missing:
            fresh = self.inner.embed(missing)
            it = iter(fresh)
            for i, vec in enumerate(out):
                if vec is None:
                    new_vec = next(it)
                    self.cache.put(self.backend_id, texts[i], new_vec)
                    out[i] = list(float(x) for x in new_vec)
        return [v for v in out if v is not None]


class ChunkIndex:
    """Exhaustive-scoring index over embedded chunks."""

    def __init__(self, embedder: Embedder, chunk_ids: Sequence[str], matrix: np.ndarray) -> None:
        if len(chunk_ids) == 0:
            raise MappingError("chunk index is empty")
        self.embedder = embedder
        self.chunk_ids = tuple(chunk_ids)
        self.matrix = matrix  # (n_chunks, dim), rows unit-normalized lazily

    @classmethod
    def build(cls, chunks: Sequence[Chunk], embedder: Embedder) -> "ChunkIndex":
        if not chunks:
            raise MappingError("chunk index is empty")
        vectors = embedder.embed([c.text for c in chunks])
        return cls(embedder, [c.chunk_id for c in chunks], np.asarray(vectors, dtype=float))


def map_item(item: MCQItem, index: ChunkIndex, cfg: MappingConfig) -> MappingResult:
    """Rank chunks for one item by the combined relevance score."""
    cfg.validate()
    metadata_query, content_query = build_queries(item)
    q_meta, q_content = index.embedder.embed([metadata_query, content_query])

    entries = []
    for i, chunk_id in enumerate(index.chunk_ids):
        row = index.matrix[i]
        sim_m = cosine_similarity(q_meta, row)
        sim_c = cosine_similarity(q_content, row)
        entries.append(
            MappingEntry(
                chunk_id=chunk_id,
                sim_metadata=sim_m,
                sim_content=sim_c,
                combined=combined_score(sim_m, sim_c, cfg),
            )
        )
    entries.sort(key=lambda e: (-e.combined, e.chunk_id))
    return MappingResult(question_id=item.question_id, entries=tuple(entries[: cfg.top_k]))
