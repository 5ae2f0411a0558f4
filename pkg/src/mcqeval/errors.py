"""Exception hierarchy shared across the pipeline.

Exit-code mapping (see cli): ConfigError -> 1, PrerequisiteError -> 2,
FailureThresholdExceeded -> 3. Everything else is a genuine bug or bad input
surfaced to the caller.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PipelineError):
    """Invalid configuration or invalid argument combination."""


class PrerequisiteError(PipelineError):
    """A stage was invoked before the artifacts it depends on exist."""


class FailureThresholdExceeded(PipelineError):
    """Item-level failure rate in a stage exceeded the configured bound."""


class IngestError(PipelineError):
    """A set file could not be ingested at all (unreadable, empty, duplicates)."""


class ChunkingError(PipelineError):
    """Document cannot be chunked (empty or markup-only)."""


class MappingError(PipelineError):
    """Invalid similarity input (dimension mismatch, zero vector, empty index)."""


class RubricError(PipelineError):
    """Rubric file violates the registry invariants."""


class ScoreValidationError(PipelineError):
    """A score record does not cover the registry or has out-of-range values."""


class DegenerateDataError(PipelineError):
    """A statistic is undefined for the given data (e.g. zero variance)."""


class InternalCheckError(PipelineError):
    """A hard internal consistency assertion failed; indicates a bug."""


class BackendError(PipelineError):
    """Base class for LLM/embedding backend failures."""


class TransientBackendError(BackendError):
    """Retryable failure (rate limit, 5xx, network)."""


class PermanentBackendError(BackendError):
    """Non-retryable failure (auth, malformed request); surfaces immediately."""


class RetriesExhaustedError(BackendError):
    """All retry attempts failed."""

    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(message)
        self.attempts = attempts


class ResponseRejected(PipelineError):
    """A model response failed structural validation.

    ``category`` is machine-readable so failure modes can be tabulated.
    """

    def __init__(self, category: str, detail: str) -> None:
        super().__init__(f"{category}: {detail}")
        self.category = category
        self.detail = detail
