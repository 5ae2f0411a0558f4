from __future__ import annotations

import pytest

from mcqeval.chunking import (
    ChunkConfig,
    chunk_markdown,
    normalize_whitespace,
    token_count,
)
from mcqeval.errors import ChunkingError


def section(title: str, words: int, level: str = "##") -> str:
    body = " ".join(f"w{i}" for i in range(words))
    return f"{level} {title}\n\n{body}\n\n"


CFG = ChunkConfig(min_tokens=50, max_tokens=200)


class TestChunkMarkdown:
    def test_identity_partition_three_sections(self):
        doc = "# Book\n\n" + section("One", 80) + section("Two", 90) + section("Three", 100)
        chunks = chunk_markdown(doc, "book", CFG)
        # the tiny "# Book" preamble merges into the first section
        assert len(chunks) == 3
        assert [c.section_path[-1] for c in chunks] == ["Book", "Two", "Three"]

    def test_short_section_merges_with_successor(self):
        # a 40-token definition followed by a 60-token example, min 100
        # (the "# Title" heading line contributes 2 tokens to each section)
        cfg = ChunkConfig(min_tokens=100, max_tokens=900)
        doc = section("Definition", 38, level="#") + section("Example", 58, level="#")
        chunks = chunk_markdown(doc, "book", cfg)
        assert len(chunks) == 1
        assert token_count(chunks[0].text) == 100
        assert "Definition" in chunks[0].text and "Example" in chunks[0].text
        assert chunks[0].section_path == ("Definition",)

    def test_empty_document_is_error(self):
        with pytest.raises(ChunkingError, match="empty"):
            chunk_markdown("", "book", CFG)
        with pytest.raises(ChunkingError, match="empty"):
            chunk_markdown("   \n  \n", "book", CFG)

    def test_markup_only_document_is_error(self):
        with pytest.raises(ChunkingError, match="markup"):
            chunk_markdown("### \n\n---\n\n```\n```\n", "book", CFG)

    def test_partition_property(self):
        doc = (
            "intro text before any heading\n\n"
            + section("Alpha", 10)
            + section("Beta", 300)
            + section("Gamma", 70)
        )
        chunks = chunk_markdown(doc, "book", CFG)
        assert normalize_whitespace("".join(c.text for c in chunks)) == normalize_whitespace(doc)

    def test_long_section_split_at_paragraph_boundaries(self):
        paragraphs = "\n\n".join(" ".join(f"p{j}w{i}" for i in range(90)) for j in range(5))
        doc = f"## Long\n\n{paragraphs}\n"
        chunks = chunk_markdown(doc, "book", CFG)
        assert len(chunks) > 1
        assert all(c.approx_token_count <= CFG.max_tokens for c in chunks)
        assert normalize_whitespace("".join(c.text for c in chunks)) == normalize_whitespace(doc)

    def test_determinism_identical_ids_and_order(self):
        doc = section("One", 80) + section("Two", 200) + section("Three", 30)
        first = chunk_markdown(doc, "book", CFG)
        second = chunk_markdown(doc, "book", CFG)
        assert [c.chunk_id for c in first] == [c.chunk_id for c in second]

    def test_chunk_id_content_addressed(self):
        doc = section("One", 80)
        a = chunk_markdown(doc, "book", CFG)[0]
        b = chunk_markdown(doc, "other-book", CFG)[0]
        assert a.chunk_id != b.chunk_id  # book_id participates in the hash

    def test_heading_inside_code_fence_is_not_a_boundary(self):
        doc = (
            "## Real\n\n"
            + " ".join(f"w{i}" for i in range(60))
            + "\n\n```\n# not a heading\n```\n\n"
            + " ".join(f"v{i}" for i in range(60))
            + "\n"
        )
        chunks = chunk_markdown(doc, "book", CFG)
        assert all("not a heading" not in c.section_path for c in chunks)

    def test_nested_heading_paths(self):
        doc = (
            "# Top\n\n" + " ".join(f"w{i}" for i in range(60)) + "\n\n"
            "## Sub\n\n" + " ".join(f"v{i}" for i in range(60)) + "\n"
        )
        chunks = chunk_markdown(doc, "book", CFG)
        assert chunks[-1].section_path == ("Top", "Sub")

    def test_cascading_merge_of_consecutive_short_sections(self):
        doc = section("A", 5) + section("B", 5) + section("C", 120)
        chunks = chunk_markdown(doc, "book", CFG)
        assert len(chunks) == 1
        assert chunks[0].section_path == ("A",)

    def test_trailing_short_section_stays(self):
        doc = section("Big", 120) + section("Tail", 5)
        chunks = chunk_markdown(doc, "book", CFG)
        assert len(chunks) == 2
        assert chunks[-1].approx_token_count < CFG.min_tokens

    def test_invalid_config(self):
        with pytest.raises(ChunkingError):
            chunk_markdown("## A\n\ntext\n", "book", ChunkConfig(min_tokens=10, max_tokens=5))
