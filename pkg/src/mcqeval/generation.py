"""Constrained MCQ generation: prompt assembly, response parsing, set runs.

Prompts are versioned template files shipped with the package; the template
version travels in every provenance record. Responses must be a fenced JSON
object with a fixed key set; every rejection carries one of four categories
(malformed_json, wrong_option_count, bad_key, empty_stem) so failure modes
can be tabulated. Item-level failures never abort a run.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

from .backends import ChatClient, ProvenanceRecord
from .errors import (
    BackendError,
    ConfigError,
    PrerequisiteError,
    ResponseRejected,
)
from .mapping import MappingResult
from .models import Chunk, MCQItem, MCQMetadata, MCQOption, SetTag

GENERATE_TEMPLATE_VERSION = "generate_mcq_v1"
MIN_PROMPT_BUDGET = 2_000

_FENCED_JSON_RE = re.compile(r"```(?:json)?\s*\n(.*?)\n\s*```", re.DOTALL)


def _load_template(name: str) -> str:
    return (
        resources.files("mcqeval")
        .joinpath(f"data/prompts/{name}.txt")
        .read_text(encoding="utf-8")
    )


@dataclass(frozen=True)
class GenerationRequest:
    source_question_id: str
    metadata: MCQMetadata
    grounding: Chunk
    prompt_template_version: str = GENERATE_TEMPLATE_VERSION

    def validate(self) -> None:
        self.metadata.validate()
        if not self.grounding.text.strip():
            raise ValueError("grounding text must be non-empty")


def _truncate_at_paragraph(text: str, limit: int) -> str:
    """Largest prefix within ``limit`` ending at a paragraph boundary.

    Falls back to a whitespace boundary when the first paragraph alone is
    over the limit, so the budget is a hard bound either way.
    """
    if len(text) <= limit:
        return text
    cut = text.rfind("\n\n", 0, limit + 1)
    if cut > 0:
        return text[:cut]
    window = text[:limit]
    space = max(window.rfind("\n"), window.rfind(" "))
    return window[:space] if space > 0 else window


def build_generation_prompt(req: GenerationRequest, budget: int = 8_000) -> str:
    """Render the generation prompt, keeping total length within ``budget``."""
    if budget < MIN_PROMPT_BUDGET:
        raise ConfigError(f"prompt budget must be >= {MIN_PROMPT_BUDGET}, got {budget}")
    req.validate()
    template = _load_template(req.prompt_template_version)
    skeleton = template.format(
        domain=req.metadata.domain,
        skill=req.metadata.skill,
        difficulty=req.metadata.difficulty,
        bloom=req.metadata.cognitive_level_bloom,
        chunk="",
    )
    headroom = budget - len(skeleton)
    if headroom <= 0:
        raise ConfigError(
            f"prompt budget {budget} cannot fit the template and metadata labels"
        )
    chunk_text = _truncate_at_paragraph(req.grounding.text.strip(), headroom)
    return template.format(
        domain=req.metadata.domain,
        skill=req.metadata.skill,
        difficulty=req.metadata.difficulty,
        bloom=req.metadata.cognitive_level_bloom,
        chunk=chunk_text,
    )


def extract_json_object(raw: str) -> dict:
    """Pull the response's JSON object out of a fence (or bare braces)."""
    candidates = []
    fenced = _FENCED_JSON_RE.search(raw)
    if fenced:
        candidates.append(fenced.group(1))
    stripped = raw.strip()
    if stripped.startswith("{") and stripped.endswith("}"):
        candidates.append(stripped)
    start, end = raw.find("{"), raw.rfind("}")
    if start != -1 and end > start:
        candidates.append(raw[start : end + 1])
    for candidate in candidates:
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise ResponseRejected("malformed_json", "no parseable JSON object in response")


def parse_mcq_response(raw: str, req: GenerationRequest, generator: str) -> MCQItem:
    """Validate a generation response into an MCQItem tagged ``generated``."""
    obj = extract_json_object(raw)

    stem = str(obj.get("stem") or "").strip()
    if not stem:
        raise ResponseRejected("empty_stem", "stem is missing or empty")

    options_raw = obj.get("options")
    if not isinstance(options_raw, list) or len(options_raw) != 4:
        count = len(options_raw) if isinstance(options_raw, list) else "none"
        raise ResponseRejected("wrong_option_count", f"expected 4 options, got {count}")
    texts = [str(o).strip() for o in options_raw]
    for i, text in enumerate(texts):
        if not text:
            raise ResponseRejected("wrong_option_count", f"option {i + 1} is empty")

    answer_key = str(obj.get("answer_key") or "").strip().upper()
    if answer_key not in ("A", "B", "C", "D"):
        raise ResponseRejected("bad_key", f"answer_key {answer_key!r} not in A-D")

    item = MCQItem(
        question_id=req.source_question_id,
        stem=stem,
        options=tuple(
            MCQOption(label=label, text=text) for label, text in zip("ABCD", texts)
        ),
        answer_key=answer_key,
        rationale=str(obj.get("rationale") or "").strip(),
        metadata=req.metadata,
        set_tag=SetTag(kind="generated", generator=generator),
        grounding_chunk_ids=(req.grounding.chunk_id,),
    )
    item.validate()
    return item


def serialize_mcq_response(item: MCQItem) -> str:
    """Canonical fenced-JSON rendering of an item (the response grammar)."""
    payload = {
        "stem": item.stem,
        "options": [opt.text for opt in item.options],
        "answer_key": item.answer_key,
        "rationale": item.rationale,
    }
    return "```json\n" + json.dumps(payload, indent=2) + "\n```\n"


_REASK_SUFFIX = (
    "\n\nYour previous reply could not be used ({reason}). "
    "Return only the fenced JSON object in the required format."
)


@dataclass(frozen=True)
class GenerationFailure:
    question_id: str
    category: str
    detail: str

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "category": self.category,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class GenerationOutcome:
    items: tuple[MCQItem, ...]
    failures: tuple[GenerationFailure, ...]
    provenance: Mapping[str, ProvenanceRecord]  # question_id -> record


def generate_set(
    baseline: Sequence[MCQItem],
    mappings: Mapping[str, MappingResult],
    chunks: Mapping[str, Chunk],
    client: ChatClient,
    *,
    budget: int = 8_000,
    max_reasks: int = 2,
    workers: int = 1,
) -> GenerationOutcome:
    """Generate one item per baseline item; failures are isolated per item."""
    missing = [item.question_id for item in baseline if item.question_id not in mappings]
    if missing:
        raise PrerequisiteError(f"items without a mapping: {missing[:5]} (total {len(missing)})")

    generator = client.descriptor.backend_id

    def run_one(
        item: MCQItem,
    ) -> tuple[str, MCQItem | None, GenerationFailure | None, ProvenanceRecord | None]:
        qid = item.question_id
        chunk_id = mappings[qid].best_chunk_id
        chunk = chunks.get(chunk_id)
        if chunk is None:
            return qid, None, GenerationFailure(qid, "backend", f"unknown chunk {chunk_id}"), None
        req = GenerationRequest(
            source_question_id=qid, metadata=item.metadata, grounding=chunk
        )
        base_prompt = build_generation_prompt(req, budget=budget)
        prompt = base_prompt
        last: ResponseRejected | None = None
        provenance: ProvenanceRecord | None = None
        try:
            for _ in range(max_reasks + 1):
                text, provenance = client.chat(
                    prompt, template_version=req.prompt_template_version, tag=qid
                )
                try:
                    generated = parse_mcq_response(text, req, generator)
                    return qid, generated, None, provenance
                except ResponseRejected as exc:
                    last = exc
                    prompt = base_prompt + _REASK_SUFFIX.format(reason=exc.category)
        except BackendError as exc:
            return qid, None, GenerationFailure(qid, "backend", str(exc)), provenance
        assert last is not None
        return qid, None, GenerationFailure(qid, last.category, last.detail), provenance

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, baseline))
    else:
        results = [run_one(item) for item in baseline]

    results.sort(key=lambda r: r[0])
    items = tuple(r[1] for r in results if r[1] is not None)
    failures = tuple(r[2] for r in results if r[2] is not None)
    provenance = {r[0]: r[3] for r in results if r[3] is not None}
    return GenerationOutcome(items=items, failures=failures, provenance=provenance)
