"""Item-set ingestion and the incomplete-item filter.

Ingestion is deliberately tolerant about the source record shape (extracted
question banks vary): stems may arrive under ``stem`` or ``question``, options
as plain strings or labeled objects, metadata nested or top-level. Every input
record either becomes a validated :class:`~mcqeval.models.MCQItem` or is
reported with a structural reason.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import IngestError
from .models import (
    BLOOM_LEVELS,
    DIFFICULTY_LEVELS,
    OPTION_LABELS,
    FilterReport,
    MCQItem,
    MCQMetadata,
    MCQOption,
    SetTag,
)

# Unresolved visual references that mark a partially extracted item. Matched
# case-insensitively as substrings of the stem and every option text.
DEFAULT_INCOMPLETE_PATTERNS: tuple[str, ...] = (
    "graph above",
    "figure above",
    "table above",
    "shown above",
    "the figure",
    "the graph shown",
    "in the table",
)

_DIFFICULTY_ALIASES = {
    "e": "easy",
    "m": "medium",
    "h": "hard",
    "easy": "easy",
    "medium": "medium",
    "hard": "hard",
}


@dataclass(frozen=True)
class IngestResult:
    """Validated items plus per-record skip reasons."""

    items: tuple[MCQItem, ...]
    skipped: tuple[tuple[str, str], ...]  # (record ref, reason)

    @property
    def counts(self) -> dict[str, int]:
        return {
            "input": len(self.items) + len(self.skipped),
            "items": len(self.items),
            "skipped": len(self.skipped),
        }


def _parse_options(raw: Any) -> tuple[MCQOption, ...]:
    """Normalize the various source option shapes to labeled A-D options."""
    if raw is None:
        raise ValueError("not an MCQ")
    if isinstance(raw, Mapping):
        # {"A": "...", "B": "..."} keyed by label
        pairs = sorted((str(k).strip().upper(), v) for k, v in raw.items())
        raw = [{"label": k, "text": v} for k, v in pairs]
    if not isinstance(raw, Sequence) or isinstance(raw, (str, bytes)):
        raise ValueError("options is not a list")
    entries = list(raw)
    if len(entries) == 0:
        raise ValueError("not an MCQ")
    if len(entries) != 4:
        raise ValueError("option count ≠ 4")
    options = []
    for i, entry in enumerate(entries):
        if isinstance(entry, Mapping):
            label = str(entry.get("label", OPTION_LABELS[i])).strip().upper()
            text = str(entry.get("text", "")).strip()
        else:
            label = OPTION_LABELS[i]
            text = str(entry).strip()
        if not text:
            raise ValueError(f"option {label} is empty")
        options.append(MCQOption(label=label, text=text))
    labels = tuple(opt.label for opt in options)
    if labels != OPTION_LABELS:
        raise ValueError(f"option labels {labels} are not A-D in order")
    return tuple(options)


def _parse_metadata(rec: Mapping[str, Any]) -> MCQMetadata:
    src = rec.get("metadata") if isinstance(rec.get("metadata"), Mapping) else rec
    domain = str(src.get("domain", "")).strip()
    skill = str(src.get("skill", "")).strip()
    difficulty_raw = str(src.get("difficulty", "")).strip().lower()
    difficulty = _DIFFICULTY_ALIASES.get(difficulty_raw, difficulty_raw)
    bloom = str(src.get("cognitive_level_bloom", "")).strip().lower()
    if not domain:
        raise ValueError("missing domain")
    if not skill:
        raise ValueError("missing skill")
    if difficulty not in DIFFICULTY_LEVELS:
        raise ValueError(f"invalid difficulty {difficulty_raw!r}")
    if bloom not in BLOOM_LEVELS:
        raise ValueError(f"invalid Bloom level {bloom!r}")
    return MCQMetadata(
        domain=domain,
        skill=skill,
        difficulty=difficulty,
        cognitive_level_bloom=bloom,
    )


def _parse_record(rec: Mapping[str, Any], set_tag: SetTag) -> MCQItem:
    stem = str(rec.get("stem") or rec.get("question") or "").strip()
    options = _parse_options(rec.get("options"))
    if not stem:
        raise ValueError("empty stem")
    answer_key = str(
        rec.get("answer_key") or rec.get("answer") or rec.get("key") or ""
    ).strip().upper()
    if answer_key not in OPTION_LABELS:
        raise ValueError(f"answer key {answer_key!r} not in A-D")
    item = MCQItem(
        question_id=str(rec["question_id"]),
        stem=stem,
        options=options,
        answer_key=answer_key,
        rationale=str(rec.get("rationale") or "").strip(),
        metadata=_parse_metadata(rec),
        set_tag=set_tag,
        grounding_chunk_ids=tuple(rec.get("grounding_chunk_ids") or ()),
    )
    item.validate()
    return item


def ingest_mcq_set(path: str | Path, set_tag: SetTag) -> IngestResult:
    """Read a JSON array of item records into validated MCQItems.

    Records that are not MCQs (no options) or that violate an item invariant
    are skipped with a reason. Raises :class:`IngestError` for file-level
    problems: unreadable file, duplicate question_id, or no valid items.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise IngestError(f"{path} does not contain an array of item records")

    items: list[MCQItem] = []
    skipped: list[tuple[str, str]] = []
    seen_ids: set[str] = set()
    for idx, rec in enumerate(raw):
        ref = str(rec.get("question_id") or f"record[{idx}]") if isinstance(rec, Mapping) else f"record[{idx}]"
        if not isinstance(rec, Mapping):
            skipped.append((ref, "record is not an object"))
            continue
        if "question_id" not in rec or not str(rec["question_id"]).strip():
            skipped.append((ref, "missing question_id"))
            continue
        qid = str(rec["question_id"])
        if qid in seen_ids:
            raise IngestError(f"duplicate question_id {qid!r} in {path}")
        seen_ids.add(qid)
        try:
            items.append(_parse_record(rec, set_tag))
        except ValueError as exc:
            reason = str(exc)
            if reason == "not an MCQ":
                skipped.append((qid, "not an MCQ"))
            else:
                skipped.append((qid, reason))
    if not items:
        raise IngestError(f"no valid MCQ items in {path}")
    return IngestResult(items=tuple(items), skipped=tuple(skipped))


def incomplete_item_filter(
    items: Iterable[MCQItem],
    patterns: Sequence[str] = DEFAULT_INCOMPLETE_PATTERNS,
) -> FilterReport:
    """Remove items whose stem or options reference missing visual context.

    Matching is case-insensitive substring search; the first matching pattern
    (in config order) is recorded as the removal reason.
    """
    lowered = [(p, p.lower()) for p in patterns]
    retained: list[str] = []
    removed: list[tuple[str, str]] = []
    for item in items:
        haystacks = [item.stem.lower()] + [t.lower() for t in item.option_texts()]
        reason = next(
            (orig for orig, low in lowered if any(low in h for h in haystacks)),
            None,
        )
        if reason is None:
            retained.append(item.question_id)
        else:
            removed.append((item.question_id, reason))
    report = FilterReport(retained=tuple(retained), removed=tuple(removed))
    report.validate()
    return report


def apply_filter(
    items: Sequence[MCQItem], report: FilterReport
) -> tuple[MCQItem, ...]:
    """Return the retained items in their original order."""
    keep = set(report.retained)
    return tuple(item for item in items if item.question_id in keep)
