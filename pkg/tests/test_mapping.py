from __future__ import annotations

import math
import random

import numpy as np
import pytest

from mcqeval.errors import ConfigError, MappingError
from mcqeval.mapping import (
    CachingEmbedder,
    ChunkIndex,
    EmbeddingCache,
    MappingConfig,
    build_queries,
    combined_score,
    cosine_similarity,
    map_item,
)

from conftest import make_chunk, make_item


class TestCosineSimilarity:
    def test_self_similarity(self):
        assert cosine_similarity([1.0, 2.0, -3.0], [1.0, 2.0, -3.0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_computed(self):
        # 32 / (sqrt(14) * sqrt(77))
        expected = 32.0 / (math.sqrt(14.0) * math.sqrt(77.0))
        assert cosine_similarity([1, 2, 3], [4, 5, 6]) == pytest.approx(expected, abs=1e-12)
        assert cosine_similarity([1, 2, 3], [4, 5, 6]) == pytest.approx(0.974632, abs=1e-6)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        u, v = rng.normal(size=8), rng.normal(size=8)
        assert cosine_similarity(u, v) == cosine_similarity(v, u)

    def test_dimension_mismatch(self):
        with pytest.raises(MappingError, match="dimension"):
            cosine_similarity([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_zero_vector(self):
        with pytest.raises(MappingError, match="zero vector"):
            cosine_similarity([0.0, 0.0], [1.0, 2.0])


class TestCombinedScore:
    def test_convex_combination_of_equal_values(self):
        assert combined_score(1.0, 1.0, MappingConfig()) == pytest.approx(1.0)

    def test_default_weights(self):
        assert combined_score(0.0, 1.0, MappingConfig()) == pytest.approx(0.7)
        assert combined_score(1.0, 0.0, MappingConfig()) == pytest.approx(0.3)

    def test_weight_normalization_identity(self):
        for w in (0.0, 0.25, 0.5, 0.9, 1.0):
            cfg = MappingConfig(metadata_weight=w, content_weight=1.0 - w)
            for s in (-1.0, -0.2, 0.0, 0.6, 1.0):
                assert combined_score(s, s, cfg) == pytest.approx(s, abs=1e-12)

    def test_monotonicity_in_each_similarity(self):
        cfg = MappingConfig()
        base = combined_score(0.1, 0.5, cfg)
        assert combined_score(0.1, 0.6, cfg) >= base
        assert combined_score(0.2, 0.5, cfg) >= base

    def test_invalid_weights(self):
        with pytest.raises(ConfigError):
            MappingConfig(metadata_weight=0.5, content_weight=0.6).validate()
        with pytest.raises(ConfigError):
            MappingConfig(metadata_weight=-0.1, content_weight=1.1).validate()

    def test_out_of_range_similarity(self):
        with pytest.raises(MappingError):
            combined_score(1.5, 0.0, MappingConfig())


class TestBuildQueries:
    def test_metadata_query_contains_labels(self):
        item = make_item(domain="Algebra", skill="Linear equations in one variable")
        metadata_query, _ = build_queries(item)
        assert "Algebra" in metadata_query
        assert "Linear equations in one variable" in metadata_query

    def test_empty_rationale_gives_stem_only(self):
        item = make_item(rationale="")
        _, content_query = build_queries(item)
        assert content_query == item.stem

    def test_rationale_appended(self):
        item = make_item(rationale="Solve for x.")
        _, content_query = build_queries(item)
        assert content_query.startswith(item.stem)
        assert "Solve for x." in content_query

    def test_deterministic(self):
        item = make_item()
        assert build_queries(item) == build_queries(item)


class StubEmbedder:
    """Deterministic embedder with hand-assigned vectors per exact text."""

    backend_id = "stub"

    def __init__(self, table: dict[str, list[float]], default_dim: int = 3):
        self.table = table
        self.default_dim = default_dim

    def embed(self, texts):
        out = []
        for text in texts:
            if text in self.table:
                out.append(list(self.table[text]))
            else:
                rng = np.random.default_rng(abs(hash(text)) % 2**32)
                vec = rng.normal(size=self.default_dim)
                out.append(list(vec / np.linalg.norm(vec)))
        return out


class TestMapItem:
    def test_self_retrieval_with_identity_embedder(self):
        item = make_item(rationale="")
        meta_q, content_q = build_queries(item)
        chunk = make_chunk(text=item.stem, chunk_id="c-self")
        other = make_chunk(text="Unrelated content about circles.", chunk_id="c-other")
        table = {
            item.stem: [1.0, 0.0, 0.0],
            meta_q: [0.0, 1.0, 0.0],
            "Unrelated content about circles.": [0.0, 0.0, 1.0],
        }
        index = ChunkIndex.build([chunk, other], StubEmbedder(table))
        result = map_item(item, index, MappingConfig(top_k=2))
        assert result.entries[0].chunk_id == "c-self"
        assert result.entries[0].sim_content == pytest.approx(1.0)

    def test_tie_breaks_on_lexicographic_chunk_id(self):
        item = make_item(rationale="")
        meta_q, content_q = build_queries(item)
        vec = [1.0, 0.0]
        table = {meta_q: vec, content_q: vec, "same text a": vec, "same text b": vec}
        chunks = [
            make_chunk(text="same text b", chunk_id="zz-late"),
            make_chunk(text="same text a", chunk_id="aa-early"),
        ]
        index = ChunkIndex.build(chunks, StubEmbedder(table))
        result = map_item(item, index, MappingConfig(top_k=2))
        assert [e.chunk_id for e in result.entries] == ["aa-early", "zz-late"]
        assert result.entries[0].combined == result.entries[1].combined

    def test_ranking_matches_brute_force_over_three_chunks(self):
        item = make_item(rationale="why")
        meta_q, content_q = build_queries(item)
        table = {
            meta_q: [1.0, 0.0, 0.0],
            content_q: [0.0, 1.0, 0.0],
            "chunk one": [0.9, 0.1, 0.0],
            "chunk two": [0.1, 0.9, 0.0],
            "chunk three": [0.5, 0.5, 0.0],
        }
        chunks = [
            make_chunk(text="chunk one", chunk_id="c1"),
            make_chunk(text="chunk two", chunk_id="c2"),
            make_chunk(text="chunk three", chunk_id="c3"),
        ]
        cfg = MappingConfig(top_k=3)
        embedder = StubEmbedder(table)
        index = ChunkIndex.build(chunks, embedder)
        result = map_item(item, index, cfg)

        # brute-force oracle: recompute all scores directly from the table
        def cos(a, b):
            a, b = np.asarray(a), np.asarray(b)
            return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

        expected = sorted(
            (
                (
                    -(0.3 * cos(table[meta_q], table[c.text]) + 0.7 * cos(table[content_q], table[c.text])),
                    c.chunk_id,
                )
                for c in chunks
            ),
        )
        assert [e.chunk_id for e in result.entries] == [cid for _, cid in expected]
        for entry in result.entries:
            assert entry.combined == pytest.approx(
                0.3 * entry.sim_metadata + 0.7 * entry.sim_content, abs=1e-12
            )

    def test_permutation_invariance(self):
        item = make_item()
        chunks = [make_chunk(text=f"text number {i}", chunk_id=f"c{i}") for i in range(6)]
        embedder = StubEmbedder({}, default_dim=5)
        cfg = MappingConfig(top_k=6)
        ranked = map_item(item, ChunkIndex.build(chunks, embedder), cfg)
        shuffled = list(chunks)
        random.Random(4).shuffle(shuffled)
        ranked_shuffled = map_item(item, ChunkIndex.build(shuffled, embedder), cfg)
        assert [e.chunk_id for e in ranked.entries] == [e.chunk_id for e in ranked_shuffled.entries]

    def test_empty_index_is_error(self):
        with pytest.raises(MappingError, match="empty"):
            ChunkIndex.build([], StubEmbedder({}))


class CountingEmbedder:
    backend_id = "counting"

    def __init__(self):
        self.calls = 0

    def embed(self, texts):
        self.calls += len(texts)
        out = []
        for text in texts:
            rng = np.random.default_rng(abs(hash(text)) % 2**32)
            vec = rng.normal(size=4)
            out.append([float(x) for x in vec / np.linalg.norm(vec)])
        return out


class TestEmbeddingCache:
    def test_same_text_twice_hits_cache_bitwise_identical(self, tmp_path):
        cache = EmbeddingCache(tmp_path / "cache.jsonl")
        inner = CountingEmbedder()
        embedder = CachingEmbedder(inner, cache)
        first = embedder.embed(["hello world"])[0]
        second = embedder.embed(["hello world"])[0]
        assert inner.calls == 1
        assert first == second  # exact float equality

    def test_cache_survives_reload(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        first = CachingEmbedder(CountingEmbedder(), EmbeddingCache(path)).embed(["abc"])[0]
        inner = CountingEmbedder()
        second = CachingEmbedder(inner, EmbeddingCache(path)).embed(["abc"])[0]
        assert inner.calls == 0
        assert first == second

    def test_cache_keyed_by_backend(self, tmp_path):
        cache = EmbeddingCache(tmp_path / "cache.jsonl")
        a, b = CountingEmbedder(), CountingEmbedder()
        b.backend_id = "other"
        CachingEmbedder(a, cache).embed(["abc"])
        CachingEmbedder(b, cache).embed(["abc"])
        assert a.calls == 1 and b.calls == 1
