"""Rubric-based judging and the descriptive aggregates.

The judge prompt embeds the whole rubric (ids, definitions, scale anchors)
and the item under evaluation, plus its mapped source passage when one
exists. It never discloses which set the item came from; a substring scan
enforces that blinding on every rendered prompt. Judges must return a fenced
JSON object scoring all 24 criteria; one structured re-ask is allowed before
an item is excluded with a logged reason.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .backends import ChatClient, ProvenanceRecord
from .errors import BackendError, InternalCheckError, ResponseRejected, ScoreValidationError
from .generation import _load_template, extract_json_object
from .models import Chunk, MCQItem
from .rubric import RubricRegistry, validate_scores

JUDGE_TEMPLATE_VERSION = "judge_item_v1"


@dataclass(frozen=True)
class Evaluation:
    """One judge's validated scores for one item."""

    question_id: str
    set_id: str
    judge_id: str
    scores: Mapping[str, int]
    item_mean: float
    provenance: ProvenanceRecord

    def validate(self, registry: RubricRegistry) -> None:
        validate_scores(self.scores, registry)
        recomputed = float(np.mean(list(self.scores.values())))
        if abs(recomputed - self.item_mean) > 1e-12:
            raise InternalCheckError(
                f"item_mean {self.item_mean} does not match scores ({recomputed})"
            )

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "set_id": self.set_id,
            "judge_id": self.judge_id,
            "scores": dict(self.scores),
            "item_mean": self.item_mean,
            "provenance": self.provenance.to_record(),
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "Evaluation":
        return cls(
            question_id=str(rec["question_id"]),
            set_id=str(rec["set_id"]),
            judge_id=str(rec["judge_id"]),
            scores={str(k): int(v) for k, v in rec["scores"].items()},
            item_mean=float(rec["item_mean"]),
            provenance=ProvenanceRecord(**rec["provenance"]),
        )


@dataclass(frozen=True)
class EvaluationFailure:
    question_id: str
    set_id: str
    judge_id: str
    category: str
    detail: str

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "set_id": self.set_id,
            "judge_id": self.judge_id,
            "category": self.category,
            "detail": self.detail,
        }


def build_judge_prompt(
    item: MCQItem, registry: RubricRegistry, grounding: Chunk | None = None
) -> str:
    template = _load_template(JUDGE_TEMPLATE_VERSION)
    anchors = registry.criteria[0].scale_anchors
    criteria_block = "\n".join(
        f"- {c.criterion_id}: {c.short_definition} [category: {c.category}]"
        for c in registry.criteria
    )
    options_block = "\n".join(f"{o.label}. {o.text}" for o in item.options)
    prompt = template.format(
        anchor_5=anchors[5],
        anchor_4=anchors[4],
        anchor_3=anchors[3],
        anchor_2=anchors[2],
        anchor_1=anchors[1],
        criteria_block=criteria_block,
        stem=item.stem,
        options_block=options_block,
        answer_key=item.answer_key,
        rationale=item.rationale or "(none)",
        domain=item.metadata.domain,
        skill=item.metadata.skill,
        difficulty=item.metadata.difficulty,
        bloom=item.metadata.cognitive_level_bloom,
        grounding_block=grounding.text.strip() if grounding else "(none available)",
    )
    _assert_blinded(prompt, item)
    return prompt


def _assert_blinded(prompt: str, item: MCQItem) -> None:
    """The judge must not learn which set the item belongs to."""
    lowered = prompt.lower()
    forbidden = {item.set_tag.label.lower()}
    if item.set_tag.generator:
        forbidden.add(item.set_tag.generator.lower())
    for token in forbidden:
        if token and token in lowered:
            raise InternalCheckError(
                f"judge prompt leaks set identity token {token!r}"
            )


def parse_judge_scores(raw: str, registry: RubricRegistry) -> dict[str, int]:
    obj = extract_json_object(raw)
    scores: dict[str, int] = {}
    for key, value in obj.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ResponseRejected("invalid_scores", f"score for {key} is not a number")
        if isinstance(value, float):
            if not value.is_integer():
                raise ResponseRejected("invalid_scores", f"score for {key} is not an integer")
            value = int(value)
        scores[str(key)] = value
    try:
        validate_scores(scores, registry)
    except ScoreValidationError as exc:
        raise ResponseRejected("invalid_scores", str(exc)) from exc
    return scores


_REASK_SUFFIX = (
    "\n\nYour previous reply could not be used ({reason}). Return only the "
    "fenced JSON object scoring every listed criterion with an integer 1-5."
)


def judge_item(
    item: MCQItem,
    registry: RubricRegistry,
    client: ChatClient,
    grounding: Chunk | None = None,
    *,
    max_reasks: int = 1,
) -> Evaluation:
    """Score one item; raises ResponseRejected after the re-ask budget."""
    base_prompt = build_judge_prompt(item, registry, grounding)
    template_version = f"{JUDGE_TEMPLATE_VERSION}/{registry.version}"
    prompt = base_prompt
    last: ResponseRejected | None = None
    for _ in range(max_reasks + 1):
        text, provenance = client.chat(
            prompt, template_version=template_version, tag=item.question_id
        )
        try:
            scores = parse_judge_scores(text, registry)
        except ResponseRejected as exc:
            last = exc
            prompt = base_prompt + _REASK_SUFFIX.format(reason=exc.category)
            continue
        evaluation = Evaluation(
            question_id=item.question_id,
            set_id=item.set_tag.label,
            judge_id=client.backend_id,
            scores=scores,
            item_mean=float(np.mean(list(scores.values()))),
            provenance=provenance,
        )
        evaluation.validate(registry)
        return evaluation
    assert last is not None
    raise last


def judge_set(
    items: Sequence[MCQItem],
    registry: RubricRegistry,
    client: ChatClient,
    groundings: Mapping[str, Chunk] | None = None,
    *,
    max_reasks: int = 1,
    workers: int = 1,
) -> tuple[tuple[Evaluation, ...], tuple[EvaluationFailure, ...]]:
    """Judge every item; results merge deterministically by question_id."""
    groundings = groundings or {}

    def run_one(item: MCQItem) -> tuple[str, Evaluation | None, EvaluationFailure | None]:
        try:
            ev = judge_item(
                item, registry, client, groundings.get(item.question_id),
                max_reasks=max_reasks,
            )
            return item.question_id, ev, None
        except ResponseRejected as exc:
            failure = EvaluationFailure(
                item.question_id, item.set_tag.label, client.backend_id,
                exc.category, exc.detail,
            )
            return item.question_id, None, failure
        except BackendError as exc:
            failure = EvaluationFailure(
                item.question_id, item.set_tag.label, client.backend_id,
                "backend", str(exc),
            )
            return item.question_id, None, failure

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, items))
    else:
        results = [run_one(item) for item in items]

    results.sort(key=lambda r: r[0])
    evaluations = tuple(r[1] for r in results if r[1] is not None)
    failures = tuple(r[2] for r in results if r[2] is not None)
    return evaluations, failures


# ---------------------------------------------------------------------------
# Descriptive aggregates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QualityBands:
    """Percentages of individual criterion scores by quality band."""

    pct_high: float  # score == 5
    pct_review: float  # score in [3, 4]
    pct_serious: float  # score in [1, 2]

    def validate(self) -> None:
        total = self.pct_high + self.pct_review + self.pct_serious
        if abs(total - 100.0) > 0.1:
            raise InternalCheckError(f"bands sum to {total}, expected 100")

    def to_record(self) -> dict:
        return {
            "pct_high": self.pct_high,
            "pct_review": self.pct_review,
            "pct_serious": self.pct_serious,
        }


def band_scores(evaluations: Iterable[Evaluation]) -> QualityBands:
    """Band percentages over all individual criterion scores."""
    high = review = serious = 0
    for ev in evaluations:
        for score in ev.scores.values():
            if score == 5:
                high += 1
            elif score >= 3:
                review += 1
            else:
                serious += 1
    total = high + review + serious
    if total == 0:
        raise ValueError("no evaluations to band")
    bands = QualityBands(
        pct_high=100.0 * high / total,
        pct_review=100.0 * review / total,
        pct_serious=100.0 * serious / total,
    )
    bands.validate()
    return bands


@dataclass(frozen=True)
class CriterionMeans:
    per_criterion: Mapping[str, float]
    per_category: Mapping[str, float]
    grand_mean: float

    def to_record(self) -> dict:
        return {
            "per_criterion": dict(self.per_criterion),
            "per_category": dict(self.per_category),
            "grand_mean": self.grand_mean,
        }


def criterion_means(
    evaluations: Sequence[Evaluation], registry: RubricRegistry
) -> CriterionMeans:
    """Unweighted per-criterion, per-category, and grand means."""
    if not evaluations:
        raise ValueError("no evaluations to aggregate")
    per_criterion = {
        cid: float(np.mean([ev.scores[cid] for ev in evaluations]))
        for cid in registry.criterion_ids
    }
    per_category = {
        cat.name: float(np.mean([per_criterion[cid] for cid in cat.criterion_ids]))
        for cat in registry.categories
    }
    grand_mean = float(np.mean(list(per_criterion.values())))
    return CriterionMeans(per_criterion, per_category, grand_mean)


@dataclass(frozen=True)
class SetSummary:
    """Table-row summary for one (set, judge) cell."""

    set_id: str
    judge_id: str
    n: int
    mean: float
    sd: float
    bands: QualityBands

    def to_record(self) -> dict:
        return {
            "set_id": self.set_id,
            "judge_id": self.judge_id,
            "n": self.n,
            "mean": self.mean,
            "sd": self.sd,
            "bands": self.bands.to_record(),
        }


def summarize_cell(evaluations: Sequence[Evaluation]) -> SetSummary:
    """Mean and SD of item means plus quality bands for one (set, judge)."""
    if not evaluations:
        raise ValueError("no evaluations to summarize")
    means = np.array([ev.item_mean for ev in evaluations])
    return SetSummary(
        set_id=evaluations[0].set_id,
        judge_id=evaluations[0].judge_id,
        n=len(evaluations),
        mean=float(np.mean(means)),
        sd=float(np.std(means, ddof=1)) if means.size > 1 else 0.0,
        bands=band_scores(evaluations),
    )
