"""Canonical registry of the 24 evaluation criteria and 6 categories.

The registry is loaded from a versioned JSON data file and is the single
source of truth for criterion ids, category membership, definitions, and the
1-5 scale anchors. Judge prompts embed the registry content verbatim, and
analysis code treats the registry as a closed vocabulary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .errors import RubricError, ScoreValidationError

CATEGORY_SIZES: dict[str, int] = {
    "Accuracy & Grounding": 4,
    "Clarity & Presentation": 4,
    "Distractor & Answer Quality": 4,
    "Difficulty & Engagement": 3,
    "Domain & Skill Alignment": 5,
    "Difficulty & Cognitive Calibration": 4,
}

CRITERION_COUNT = 24
MIN_SCORE = 1
MAX_SCORE = 5


@dataclass(frozen=True)
class Criterion:
    criterion_id: str
    category: str
    short_definition: str
    scale_anchors: Mapping[int, str]


@dataclass(frozen=True)
class Category:
    name: str
    criterion_ids: tuple[str, ...]


@dataclass(frozen=True)
class RubricRegistry:
    version: str
    criteria: tuple[Criterion, ...]
    categories: tuple[Category, ...]

    @property
    def criterion_ids(self) -> tuple[str, ...]:
        return tuple(c.criterion_id for c in self.criteria)

    def criterion(self, criterion_id: str) -> Criterion:
        for c in self.criteria:
            if c.criterion_id == criterion_id:
                return c
        raise KeyError(criterion_id)

    def category_of(self, criterion_id: str) -> str:
        return self.criterion(criterion_id).category

    def category_names(self) -> tuple[str, ...]:
        return tuple(cat.name for cat in self.categories)


def default_rubric_path() -> Path:
    return Path(str(resources.files("mcqeval").joinpath("data/rubric_v1.json")))


def load_rubric(path: str | Path | None = None) -> RubricRegistry:
    """Load and validate the rubric registry from a JSON data file."""
    path = Path(path) if path is not None else default_rubric_path()
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RubricError(f"cannot load rubric from {path}: {exc}") from exc

    anchors_raw = raw.get("scale_anchors") or {}
    anchors = {int(k): str(v) for k, v in anchors_raw.items()}
    if sorted(anchors) != list(range(MIN_SCORE, MAX_SCORE + 1)):
        raise RubricError(f"scale_anchors must cover {MIN_SCORE}..{MAX_SCORE}")

    criteria: list[Criterion] = []
    seen: set[str] = set()
    for rec in raw.get("criteria", []):
        cid = str(rec["criterion_id"])
        category = str(rec["category"])
        if cid in seen:
            raise RubricError(f"duplicate criterion id {cid!r}")
        seen.add(cid)
        if category not in CATEGORY_SIZES:
            raise RubricError(f"unknown category {category!r} for {cid!r}")
        criteria.append(
            Criterion(
                criterion_id=cid,
                category=category,
                short_definition=str(rec["short_definition"]),
                scale_anchors=anchors,
            )
        )

    if len(criteria) != CRITERION_COUNT:
        raise RubricError(f"expected {CRITERION_COUNT} criteria, got {len(criteria)}")

    categories: list[Category] = []
    for name, expected_size in CATEGORY_SIZES.items():
        members = tuple(c.criterion_id for c in criteria if c.category == name)
        if len(members) != expected_size:
            raise RubricError(
                f"category {name!r} has {len(members)} criteria, expected {expected_size}"
            )
        categories.append(Category(name=name, criterion_ids=members))

    return RubricRegistry(
        version=str(raw.get("version", "unversioned")),
        criteria=tuple(criteria),
        categories=tuple(categories),
    )


def validate_scores(scores: Mapping[str, Any], registry: RubricRegistry) -> None:
    """Accept iff all registry ids are present with integer scores in 1..5."""
    expected = set(registry.criterion_ids)
    got = set(scores)
    missing = expected - got
    if missing:
        raise ScoreValidationError(f"missing criterion: {sorted(missing)}")
    extra = got - expected
    if extra:
        raise ScoreValidationError(f"unknown criterion: {sorted(extra)}")
    for cid, value in scores.items():
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScoreValidationError(f"score for {cid} is not an integer: {value!r}")
        if not (MIN_SCORE <= value <= MAX_SCORE):
            raise ScoreValidationError(f"score for {cid} out of range: {value}")
