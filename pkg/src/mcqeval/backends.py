"""Uniform chat/embedding backend interface with deterministic mocks.

Every request goes through the same policy wrapper: a requests-per-minute
rate limiter, bounded retries with exponential backoff on transient failures,
and a provenance record per call. Mock backends derive every output from a
hash of (seed, inputs), so offline runs are fully reproducible; HTTP adapters
speak the common JSON chat/embeddings wire format with keys read from the
environment.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import requests

from .errors import (
    ConfigError,
    PermanentBackendError,
    RetriesExhaustedError,
    TransientBackendError,
)
from .models import MCQMetadata

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 1.0
    max_delay: float = 30.0
    jitter: bool = True

    def validate(self) -> None:
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")
        if self.base_delay < 0 or self.max_delay < self.base_delay:
            raise ConfigError("need 0 <= base_delay <= max_delay")

    def delay(self, attempt: int, rng: random.Random) -> float:
        raw = min(self.base_delay * 2 ** (attempt - 1), self.max_delay)
        return raw * rng.uniform(0.5, 1.0) if self.jitter else raw


@dataclass(frozen=True)
class BackendDescriptor:
    backend_id: str
    kind: str  # "chat" | "embedding"
    model_name: str
    endpoint: str = "mock"
    requests_per_minute: int = 0  # 0 disables rate limiting
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    seed: int = 0
    embedding_dim: int = 48
    api_key_env: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 1024
    # mock-only: (tag, mode) pairs; mode in {"garbage", "transient", "permanent"}
    mock_failures: tuple[tuple[str, str], ...] = ()

    def validate(self) -> None:
        if not self.backend_id:
            raise ConfigError("backend_id must be non-empty")
        if self.kind not in ("chat", "embedding"):
            raise ConfigError(f"invalid backend kind {self.kind!r}")
        if self.requests_per_minute < 0:
            raise ConfigError("requests_per_minute must be >= 0")
        if self.embedding_dim < 1:
            raise ConfigError("embedding_dim must be >= 1")
        self.retry.validate()

    @property
    def is_mock(self) -> bool:
        return self.endpoint == "mock"


@dataclass(frozen=True)
class ProvenanceRecord:
    backend_id: str
    model_name: str
    prompt_template_version: str
    request_hash: str
    timestamp: str
    attempt_count: int

    def to_record(self) -> dict[str, Any]:
        return {
            "backend_id": self.backend_id,
            "model_name": self.model_name,
            "prompt_template_version": self.prompt_template_version,
            "request_hash": self.request_hash,
            "timestamp": self.timestamp,
            "attempt_count": self.attempt_count,
        }


class ProvenanceLog:
    """Append-only JSON Lines log; appends are atomic per record."""

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self.records: list[ProvenanceRecord] = []

    def append(self, record: ProvenanceRecord) -> None:
        with self._lock:
            self.records.append(record)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.to_record()) + "\n")


class RateLimiter:
    """Spaces acquisitions so the configured requests/minute bound holds."""

    def __init__(
        self,
        requests_per_minute: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.interval = 60.0 / requests_per_minute if requests_per_minute > 0 else 0.0
        self._clock = clock
        self._sleep = sleep
        self._next_free = 0.0
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self.interval == 0.0:
            return
        with self._lock:
            now = self._clock()
            wait = self._next_free - now
            if wait > 0:
                self._sleep(wait)
                now = self._clock()
            self._next_free = max(now, self._next_free) + self.interval


def request_hash(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _hash_int(key: str) -> int:
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "big")


def _unit_interval(key: str) -> float:
    return _hash_int(key) / 2**64


class _PolicyClient:
    """Shared retry/rate-limit/provenance wrapper for all transports."""

    def __init__(
        self,
        descriptor: BackendDescriptor,
        provenance_log: ProvenanceLog | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        descriptor.validate()
        self.descriptor = descriptor
        self.provenance_log = provenance_log
        self._limiter = RateLimiter(descriptor.requests_per_minute, clock, sleep)
        self._sleep = sleep
        self._rng = random.Random(descriptor.seed ^ _hash_int(descriptor.backend_id))

    @property
    def backend_id(self) -> str:
        return self.descriptor.backend_id

    def _run(self, attempt_fn: Callable[[], Any]) -> tuple[Any, int]:
        policy = self.descriptor.retry
        last_error: Exception | None = None
        for attempt in range(1, policy.max_attempts + 1):
            self._limiter.acquire()
            try:
                return attempt_fn(), attempt
            except TransientBackendError as exc:
                last_error = exc
                if attempt == policy.max_attempts:
                    break
                self._sleep(policy.delay(attempt, self._rng))
        raise RetriesExhaustedError(
            f"{self.backend_id}: {last_error}", attempts=policy.max_attempts
        )

    def _provenance(self, template_version: str, req_hash: str, attempts: int) -> ProvenanceRecord:
        record = ProvenanceRecord(
            backend_id=self.descriptor.backend_id,
            model_name=self.descriptor.model_name,
            prompt_template_version=template_version,
            request_hash=req_hash,
            timestamp=datetime.now(timezone.utc).isoformat(),
            attempt_count=attempts,
        )
        if self.provenance_log is not None:
            self.provenance_log.append(record)
        return record


class ChatClient(_PolicyClient):
    def chat(
        self,
        prompt: str,
        *,
        template_version: str = "unversioned",
        tag: str | None = None,
    ) -> tuple[str, ProvenanceRecord]:
        if self.descriptor.kind != "chat":
            raise ConfigError(f"{self.backend_id} is not a chat backend")
        text, attempts = self._run(lambda: self._attempt(prompt, tag))
        return text, self._provenance(template_version, request_hash(prompt), attempts)

    def _attempt(self, prompt: str, tag: str | None) -> str:
        raise NotImplementedError


class EmbeddingClient(_PolicyClient):
    def embed(
        self,
        texts: Sequence[str],
        *,
        template_version: str = "embedding",
    ) -> tuple[list[list[float]], ProvenanceRecord]:
        if self.descriptor.kind != "embedding":
            raise ConfigError(f"{self.backend_id} is not an embedding backend")
        if not texts:
            raise ConfigError("texts must be non-empty")
        vectors, attempts = self._run(lambda: self._attempt(list(texts)))
        return vectors, self._provenance(
            template_version, request_hash("\x1f".join(texts)), attempts
        )

    def _attempt(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Deterministic mocks
# ---------------------------------------------------------------------------

_CRITERION_LINE_RE = re.compile(r"^- ([a-z][a-z0-9_]*):", re.MULTILINE)


def mock_chat_mcq(metadata: MCQMetadata, chunk_text: str, seed: int = 0) -> str:
    """Deterministic, always-parseable MCQ response for offline runs.

    The item is a linear-equation template whose coefficients, correct value,
    and answer position all derive from a hash of the inputs.
    """
    if not chunk_text.strip():
        raise ConfigError("chunk text must be non-empty")
    h = _hash_int(
        "|".join(
            [
                str(seed),
                metadata.domain,
                metadata.skill,
                metadata.difficulty,
                metadata.cognitive_level_bloom,
                chunk_text,
            ]
        )
    )
    a = 2 + h % 8
    b = 1 + (h >> 8) % 19
    x0 = -9 + (h >> 16) % 19
    c = a * x0 + b
    key_idx = (h >> 24) % 4
    distractors = [x0 + 1, x0 - 1, x0 + a]
    values = distractors[:key_idx] + [x0] + distractors[key_idx:]
    stem = f"If {a}x + {b} = {c}, what is the value of x?"
    rationale = (
        f"Subtract {b} from both sides to get {a}x = {c - b}, "
        f"then divide by {a}: x = {x0}."
    )
    payload = {
        "stem": stem,
        "options": [str(v) for v in values[:4]],
        "answer_key": "ABCD"[key_idx],
        "rationale": rationale,
    }
    return "```json\n" + json.dumps(payload, indent=2) + "\n```\n"


def _mock_judge_scores(prompt: str, criterion_ids: Sequence[str], seed: int) -> str:
    scores: dict[str, int] = {}
    for cid in criterion_ids:
        u = _unit_interval(f"{seed}|{cid}|{prompt}")
        if u < 0.70:
            scores[cid] = 5
        elif u < 0.90:
            scores[cid] = 4
        elif u < 0.97:
            scores[cid] = 3
        elif u < 0.995:
            scores[cid] = 2
        else:
            scores[cid] = 1
    return "```json\n" + json.dumps(scores, indent=2) + "\n```\n"


class MockChatClient(ChatClient):
    """Responds to generation prompts with a synthetic MCQ and to judging
    prompts with a synthetic score map; everything is (seed, prompt)-determined.
    """

    def _attempt(self, prompt: str, tag: str | None) -> str:
        mode = dict(self.descriptor.mock_failures).get(tag or "")
        if mode == "transient":
            raise TransientBackendError(f"injected transient failure for {tag}")
        if mode == "permanent":
            raise PermanentBackendError(f"injected permanent failure for {tag}")
        if mode == "garbage":
            return "I was unable to produce the requested structure."

        seed = self.descriptor.seed
        criterion_ids = _CRITERION_LINE_RE.findall(prompt)
        if '"answer_key"' in prompt:
            metadata = _metadata_from_prompt(prompt)
            chunk = _section_from_prompt(prompt) or prompt
            return mock_chat_mcq(metadata, chunk, seed=seed ^ _hash_int(prompt) % 2**32)
        if criterion_ids:
            return _mock_judge_scores(prompt, criterion_ids, seed)
        return f"mock:{request_hash(f'{seed}|{prompt}')}"


_PROMPT_FIELD_RES = {
    "domain": re.compile(r"^Domain: (.*)$", re.MULTILINE),
    "skill": re.compile(r"^Skill: (.*)$", re.MULTILINE),
    "difficulty": re.compile(r"^Difficulty: (.*)$", re.MULTILINE),
    "bloom": re.compile(r"^Cognitive level \(Bloom\): (.*)$", re.MULTILINE),
}


def _metadata_from_prompt(prompt: str) -> MCQMetadata:
    """Best-effort read of the labeled metadata lines in a generation prompt."""

    def find(key: str, default: str) -> str:
        m = _PROMPT_FIELD_RES[key].search(prompt)
        return m.group(1).strip() if m else default

    return MCQMetadata(
        domain=find("domain", "Algebra"),
        skill=find("skill", "Linear equations in one variable"),
        difficulty=find("difficulty", "easy"),
        cognitive_level_bloom=find("bloom", "apply"),
    )


def _section_from_prompt(prompt: str) -> str | None:
    m = re.search(r"Source passage:\n(.*)$", prompt, re.DOTALL)
    return m.group(1) if m else None


class MockEmbeddingClient(EmbeddingClient):
    """Hash-seeded unit vectors: deterministic, unit-norm, fixed dimension."""

    def _attempt(self, texts: list[str]) -> list[list[float]]:
        dim = self.descriptor.embedding_dim
        out = []
        for text in texts:
            key = f"{self.descriptor.backend_id}|{self.descriptor.model_name}|{self.descriptor.seed}|{text}"
            rng = np.random.default_rng(_hash_int(key))
            vec = rng.standard_normal(dim)
            vec /= np.linalg.norm(vec)
            out.append([float(x) for x in vec])
        return out


# ---------------------------------------------------------------------------
# HTTP adapters (OpenAI-compatible JSON wire format)
# ---------------------------------------------------------------------------

Transport = Callable[[str, dict, dict, float], tuple[int, Any]]


def _requests_transport(url: str, payload: dict, headers: dict, timeout: float) -> tuple[int, Any]:
    try:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.RequestException as exc:
        raise TransientBackendError(f"network error: {exc}") from exc
    try:
        body = resp.json()
    except ValueError:
        body = resp.text
    return resp.status_code, body


def _classify_status(status: int, body: Any, backend_id: str) -> None:
    if status == 200:
        return
    detail = f"{backend_id}: HTTP {status}: {str(body)[:200]}"
    if status in RETRYABLE_STATUS:
        raise TransientBackendError(detail)
    raise PermanentBackendError(detail)


class _HttpMixin:
    descriptor: BackendDescriptor

    def __init__(self, *args: Any, transport: Transport = _requests_transport,
                 timeout: float = 120.0, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        self._transport = transport
        self._timeout = timeout

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        env = self.descriptor.api_key_env
        if env:
            key = os.environ.get(env)
            if not key:
                raise PermanentBackendError(
                    f"{self.descriptor.backend_id}: environment variable {env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers


class HttpChatClient(_HttpMixin, ChatClient):
    def _attempt(self, prompt: str, tag: str | None) -> str:
        payload = {
            "model": self.descriptor.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.descriptor.temperature,
            "max_tokens": self.descriptor.max_output_tokens,
        }
        status, body = self._transport(
            self.descriptor.endpoint, payload, self._headers(), self._timeout
        )
        _classify_status(status, body, self.descriptor.backend_id)
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise PermanentBackendError(
                f"{self.descriptor.backend_id}: malformed chat response"
            ) from exc


class HttpEmbeddingClient(_HttpMixin, EmbeddingClient):
    def _attempt(self, texts: list[str]) -> list[list[float]]:
        payload = {"model": self.descriptor.model_name, "input": texts}
        status, body = self._transport(
            self.descriptor.endpoint, payload, self._headers(), self._timeout
        )
        _classify_status(status, body, self.descriptor.backend_id)
        try:
            data = sorted(body["data"], key=lambda d: d["index"])
            vectors = [[float(x) for x in d["embedding"]] for d in data]
        except (KeyError, TypeError) as exc:
            raise PermanentBackendError(
                f"{self.descriptor.backend_id}: malformed embedding response"
            ) from exc
        if len(vectors) != len(texts):
            raise PermanentBackendError(
                f"{self.descriptor.backend_id}: expected {len(texts)} vectors, got {len(vectors)}"
            )
        return vectors


def build_chat_client(
    descriptor: BackendDescriptor,
    provenance_log: ProvenanceLog | None = None,
    **kwargs: Any,
) -> ChatClient:
    cls = MockChatClient if descriptor.is_mock else HttpChatClient
    return cls(descriptor, provenance_log, **kwargs)


def build_embedding_client(
    descriptor: BackendDescriptor,
    provenance_log: ProvenanceLog | None = None,
    **kwargs: Any,
) -> EmbeddingClient:
    cls = MockEmbeddingClient if descriptor.is_mock else HttpEmbeddingClient
    return cls(descriptor, provenance_log, **kwargs)


class CachedEmbedderAdapter:
    """Adapts an EmbeddingClient to the mapping module's Embedder protocol."""

    def __init__(self, client: EmbeddingClient) -> None:
        self.client = client

    @property
    def backend_id(self) -> str:
        return self.client.backend_id

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        vectors, _ = self.client.embed(texts)
        return vectors
