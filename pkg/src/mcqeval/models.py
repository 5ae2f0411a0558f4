"""Core item and corpus data types.

All types are immutable value objects with explicit ``validate`` methods and
JSON-record round-tripping (``to_record`` / ``from_record``). Field names in
the serialized records match the attribute names exactly; persisted artifacts
are JSON Lines of these records.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

DIFFICULTY_LEVELS = ("easy", "medium", "hard")
BLOOM_LEVELS = ("remember", "understand", "apply", "analyze", "evaluate", "create")
OPTION_LABELS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class MCQMetadata:
    """Constraint metadata attached to every item."""

    domain: str
    skill: str
    difficulty: str
    cognitive_level_bloom: str

    def validate(self) -> None:
        if not self.domain.strip():
            raise ValueError("domain must be non-empty")
        if not self.skill.strip():
            raise ValueError("skill must be non-empty")
        if self.difficulty not in DIFFICULTY_LEVELS:
            raise ValueError(f"invalid difficulty {self.difficulty!r}")
        if self.cognitive_level_bloom not in BLOOM_LEVELS:
            raise ValueError(f"invalid Bloom level {self.cognitive_level_bloom!r}")

    def to_record(self) -> dict[str, str]:
        return {
            "domain": self.domain,
            "skill": self.skill,
            "difficulty": self.difficulty,
            "cognitive_level_bloom": self.cognitive_level_bloom,
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "MCQMetadata":
        return cls(
            domain=str(rec["domain"]),
            skill=str(rec["skill"]),
            difficulty=str(rec["difficulty"]),
            cognitive_level_bloom=str(rec["cognitive_level_bloom"]),
        )


@dataclass(frozen=True)
class MCQOption:
    label: str
    text: str

    def to_record(self) -> dict[str, str]:
        return {"label": self.label, "text": self.text}


@dataclass(frozen=True)
class SetTag:
    """Which item set an item belongs to.

    ``kind`` is "baseline" or "generated"; generated sets carry the generator
    backend name. ``label`` is the canonical set identifier used for grouping
    and file naming.
    """

    kind: str
    generator: str | None = None

    def validate(self) -> None:
        if self.kind not in ("baseline", "generated"):
            raise ValueError(f"invalid set kind {self.kind!r}")
        if self.kind == "generated" and not self.generator:
            raise ValueError("generated set requires a generator name")
        if self.kind == "baseline" and self.generator:
            raise ValueError("baseline set must not name a generator")

    @property
    def label(self) -> str:
        return self.generator if self.kind == "generated" else "baseline"

    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind, "generator": self.generator}

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "SetTag":
        return cls(kind=str(rec["kind"]), generator=rec.get("generator"))


BASELINE_TAG = SetTag(kind="baseline")


@dataclass(frozen=True)
class MCQItem:
    """One multiple-choice question with exactly four labeled options."""

    question_id: str
    stem: str
    options: tuple[MCQOption, ...]
    answer_key: str
    rationale: str
    metadata: MCQMetadata
    set_tag: SetTag
    grounding_chunk_ids: tuple[str, ...] = ()

    def validate(self) -> None:
        if not self.question_id.strip():
            raise ValueError("question_id must be non-empty")
        if not self.stem.strip():
            raise ValueError("stem must be non-empty")
        labels = tuple(opt.label for opt in self.options)
        if labels != OPTION_LABELS:
            raise ValueError(f"options must be labeled {OPTION_LABELS}, got {labels}")
        if self.answer_key not in OPTION_LABELS:
            raise ValueError(f"answer_key {self.answer_key!r} not in {OPTION_LABELS}")
        self.metadata.validate()
        self.set_tag.validate()

    def option_texts(self) -> tuple[str, ...]:
        return tuple(opt.text for opt in self.options)

    def to_record(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "stem": self.stem,
            "options": [opt.to_record() for opt in self.options],
            "answer_key": self.answer_key,
            "rationale": self.rationale,
            "metadata": self.metadata.to_record(),
            "set_tag": self.set_tag.to_record(),
            "grounding_chunk_ids": list(self.grounding_chunk_ids),
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "MCQItem":
        item = cls(
            question_id=str(rec["question_id"]),
            stem=str(rec["stem"]),
            options=tuple(
                MCQOption(label=str(o["label"]), text=str(o["text"]))
                for o in rec["options"]
            ),
            answer_key=str(rec["answer_key"]),
            rationale=str(rec.get("rationale") or ""),
            metadata=MCQMetadata.from_record(rec["metadata"]),
            set_tag=SetTag.from_record(rec["set_tag"]),
            grounding_chunk_ids=tuple(rec.get("grounding_chunk_ids") or ()),
        )
        item.validate()
        return item


@dataclass(frozen=True)
class Chunk:
    """One provenance unit of textbook text.

    ``chunk_id`` is content-addressed: identical (book_id, section_path,
    normalized text) always hashes to the same id.
    """

    chunk_id: str
    book_id: str
    section_path: tuple[str, ...]
    text: str
    approx_token_count: int

    def validate(self) -> None:
        if not " ".join(self.text.split()):
            raise ValueError("chunk text is empty after whitespace normalization")
        if self.approx_token_count < 1:
            raise ValueError("approx_token_count must be >= 1")

    def to_record(self) -> dict[str, Any]:
        return {
            "chunk_id": self.chunk_id,
            "book_id": self.book_id,
            "section_path": list(self.section_path),
            "text": self.text,
            "approx_token_count": self.approx_token_count,
        }

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "Chunk":
        return cls(
            chunk_id=str(rec["chunk_id"]),
            book_id=str(rec["book_id"]),
            section_path=tuple(str(p) for p in rec["section_path"]),
            text=str(rec["text"]),
            approx_token_count=int(rec["approx_token_count"]),
        )


@dataclass(frozen=True)
class FilterReport:
    """Outcome of the incomplete-item filter over one item collection."""

    retained: tuple[str, ...]
    removed: tuple[tuple[str, str], ...] = field(default=())

    @property
    def counts(self) -> dict[str, int]:
        return {
            "input": len(self.retained) + len(self.removed),
            "retained": len(self.retained),
            "removed": len(self.removed),
        }

    def validate(self) -> None:
        ids = list(self.retained) + [qid for qid, _ in self.removed]
        if len(ids) != len(set(ids)):
            raise ValueError("an id appears more than once across retained/removed")

    def to_record(self) -> dict[str, Any]:
        return {
            "retained": list(self.retained),
            "removed": [[qid, reason] for qid, reason in self.removed],
            "counts": self.counts,
        }
