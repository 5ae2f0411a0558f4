from __future__ import annotations

from pathlib import Path

import pytest

from mcqeval.models import BASELINE_TAG, Chunk, MCQItem, MCQMetadata, MCQOption, SetTag
from mcqeval.rubric import load_rubric

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES_DIR = REPO_ROOT / "fixtures"


def make_metadata(**overrides) -> MCQMetadata:
    fields = {
        "domain": "Algebra",
        "skill": "Linear equations in one variable",
        "difficulty": "easy",
        "cognitive_level_bloom": "apply",
    }
    fields.update(overrides)
    return MCQMetadata(**fields)


def make_item(
    question_id: str = "q001",
    stem: str = "If 3x + 2 = 11, what is x?",
    option_texts: tuple[str, ...] = ("3", "4", "5", "6"),
    answer_key: str = "A",
    rationale: str = "Subtract 2 and divide by 3.",
    set_tag: SetTag = BASELINE_TAG,
    grounding_chunk_ids: tuple[str, ...] = (),
    **metadata_overrides,
) -> MCQItem:
    item = MCQItem(
        question_id=question_id,
        stem=stem,
        options=tuple(
            MCQOption(label=label, text=text)
            for label, text in zip("ABCD", option_texts)
        ),
        answer_key=answer_key,
        rationale=rationale,
        metadata=make_metadata(**metadata_overrides),
        set_tag=set_tag,
        grounding_chunk_ids=grounding_chunk_ids,
    )
    item.validate()
    return item


def make_chunk(
    text: str = "A linear equation has the form ax + b = c.\n\nSolve by isolating x.",
    chunk_id: str = "chunk0001",
    book_id: str = "book",
    section_path: tuple[str, ...] = ("Algebra", "Linear equations"),
) -> Chunk:
    return Chunk(
        chunk_id=chunk_id,
        book_id=book_id,
        section_path=section_path,
        text=text,
        approx_token_count=max(1, len(text.split())),
    )


@pytest.fixture(scope="session")
def registry():
    return load_rubric()


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES_DIR
