from __future__ import annotations

import json
import random

import pytest

from mcqeval.backends import BackendDescriptor, MockChatClient
from mcqeval.errors import ConfigError, PrerequisiteError, ResponseRejected
from mcqeval.generation import (
    GenerationRequest,
    build_generation_prompt,
    generate_set,
    parse_mcq_response,
    serialize_mcq_response,
)
from mcqeval.mapping import MappingEntry, MappingResult
from mcqeval.models import MCQItem, MCQOption, SetTag

from conftest import make_chunk, make_item, make_metadata


def make_request(chunk_text: str | None = None, **md_overrides) -> GenerationRequest:
    chunk = make_chunk(text=chunk_text) if chunk_text else make_chunk()
    return GenerationRequest(
        source_question_id="q042",
        metadata=make_metadata(**md_overrides),
        grounding=chunk,
    )


class TestBuildGenerationPrompt:
    def test_contains_all_metadata_values_verbatim(self):
        req = make_request(
            domain="Geometry and Trigonometry",
            skill="Right triangle trigonometry",
            difficulty="hard",
            cognitive_level_bloom="analyze",
        )
        prompt = build_generation_prompt(req)
        for value in (
            "Geometry and Trigonometry",
            "Right triangle trigonometry",
            "hard",
            "analyze",
        ):
            assert value in prompt
        assert req.grounding.text.strip() in prompt

    def test_chunk_truncated_at_paragraph_boundary_within_budget(self):
        paragraphs = "\n\n".join(f"Paragraph {i} " + "word " * 300 for i in range(6))
        req = make_request(chunk_text=paragraphs)
        budget = 4_000
        prompt = build_generation_prompt(req, budget=budget)
        assert len(prompt) <= budget
        assert "Paragraph 0" in prompt
        assert "Paragraph 5" not in prompt
        # the retained passage ends exactly where a paragraph ended
        tail = prompt.rsplit("Source passage:\n", 1)[1]
        assert paragraphs.startswith(tail)

    def test_identical_requests_identical_prompts(self):
        assert build_generation_prompt(make_request()) == build_generation_prompt(make_request())

    def test_budget_too_small(self):
        with pytest.raises(ConfigError):
            build_generation_prompt(make_request(), budget=100)


class TestParseMcqResponse:
    def test_well_formed_fenced_response(self):
        raw = (
            '```json\n{"stem": "What is 2 + 2?", "options": ["3", "4", "5", "6"],'
            ' "answer_key": "B", "rationale": "Add."}\n```'
        )
        item = parse_mcq_response(raw, make_request(), generator="gen-x")
        assert item.question_id == "q042"
        assert len(item.options) == 4
        assert item.answer_key == "B"
        assert item.set_tag == SetTag(kind="generated", generator="gen-x")
        assert item.grounding_chunk_ids == (make_chunk().chunk_id,)

    def test_five_options_rejected(self):
        raw = json.dumps(
            {"stem": "s", "options": ["1", "2", "3", "4", "5"], "answer_key": "A", "rationale": ""}
        )
        with pytest.raises(ResponseRejected) as excinfo:
            parse_mcq_response(raw, make_request(), generator="g")
        assert excinfo.value.category == "wrong_option_count"

    def test_bad_key_rejected(self):
        raw = json.dumps(
            {"stem": "s", "options": ["1", "2", "3", "4"], "answer_key": "E", "rationale": ""}
        )
        with pytest.raises(ResponseRejected) as excinfo:
            parse_mcq_response(raw, make_request(), generator="g")
        assert excinfo.value.category == "bad_key"

    def test_empty_stem_rejected(self):
        raw = json.dumps(
            {"stem": "  ", "options": ["1", "2", "3", "4"], "answer_key": "A", "rationale": ""}
        )
        with pytest.raises(ResponseRejected) as excinfo:
            parse_mcq_response(raw, make_request(), generator="g")
        assert excinfo.value.category == "empty_stem"

    def test_malformed_json_rejected(self):
        with pytest.raises(ResponseRejected) as excinfo:
            parse_mcq_response("no structure here at all", make_request(), generator="g")
        assert excinfo.value.category == "malformed_json"

    def test_serialize_then_parse_round_trip_over_random_items(self):
        rng = random.Random(99)
        chunk = make_chunk()
        for i in range(200):
            options = tuple(
                MCQOption(label=label, text=f"opt-{rng.randrange(10**6)}")
                for label in "ABCD"
            )
            source = MCQItem(
                question_id=f"q{i:03d}",
                stem=f"Stem {rng.randrange(10**9)} with {{braces}} and \"quotes\"?",
                options=options,
                answer_key=rng.choice("ABCD"),
                rationale=f"Because {rng.randrange(100)}.",
                metadata=make_metadata(),
                set_tag=SetTag(kind="generated", generator="gen-r"),
                grounding_chunk_ids=(chunk.chunk_id,),
            )
            source.validate()
            req = GenerationRequest(
                source_question_id=source.question_id,
                metadata=source.metadata,
                grounding=chunk,
            )
            parsed = parse_mcq_response(serialize_mcq_response(source), req, generator="gen-r")
            assert parsed == source


def mappings_for(items, chunk):
    entry = MappingEntry(chunk_id=chunk.chunk_id, sim_metadata=1.0, sim_content=1.0, combined=1.0)
    return {item.question_id: MappingResult(item.question_id, (entry,)) for item in items}


def gen_client(**overrides):
    fields = dict(backend_id="gen-test", kind="chat", model_name="mock-gen", seed=11)
    fields.update(overrides)
    return MockChatClient(BackendDescriptor(**fields))


class TestGenerateSet:
    def test_mock_backend_generates_all(self):
        items = [make_item(f"q{i:03d}") for i in range(3)]
        chunk = make_chunk()
        outcome = generate_set(items, mappings_for(items, chunk), {chunk.chunk_id: chunk}, gen_client())
        assert len(outcome.items) == 3
        assert outcome.failures == ()
        assert [i.question_id for i in outcome.items] == ["q000", "q001", "q002"]

    def test_metadata_fidelity(self):
        items = [
            make_item("q1", difficulty="hard", cognitive_level_bloom="analyze"),
            make_item("q2", domain="Advanced Math", skill="Quadratic equations"),
        ]
        chunk = make_chunk()
        outcome = generate_set(items, mappings_for(items, chunk), {chunk.chunk_id: chunk}, gen_client())
        by_id = {i.question_id: i for i in outcome.items}
        for src in items:
            assert by_id[src.question_id].metadata == src.metadata

    def test_grounding_provenance_recorded(self):
        items = [make_item("q1")]
        chunk = make_chunk()
        outcome = generate_set(items, mappings_for(items, chunk), {chunk.chunk_id: chunk}, gen_client())
        assert outcome.items[0].grounding_chunk_ids == (chunk.chunk_id,)
        assert outcome.provenance["q1"].attempt_count >= 1

    def test_garbage_response_isolated_to_one_item(self):
        items = [make_item(f"q{i}") for i in range(3)]
        chunk = make_chunk()
        mappings = mappings_for(items, chunk)
        chunks = {chunk.chunk_id: chunk}
        clean = generate_set(items, mappings, chunks, gen_client())
        broken = generate_set(
            items, mappings, chunks, gen_client(mock_failures=(("q1", "garbage"),))
        )
        assert len(broken.items) == 2
        assert len(broken.failures) == 1
        assert broken.failures[0].question_id == "q1"
        assert broken.failures[0].category == "malformed_json"
        # other items byte-identical to the clean run
        clean_others = [i for i in clean.items if i.question_id != "q1"]
        broken_others = list(broken.items)
        assert clean_others == broken_others

    def test_backend_error_reported_not_raised(self):
        items = [make_item("q0"), make_item("q1")]
        chunk = make_chunk()
        outcome = generate_set(
            items,
            mappings_for(items, chunk),
            {chunk.chunk_id: chunk},
            gen_client(mock_failures=(("q1", "permanent"),)),
        )
        assert len(outcome.items) == 1
        assert outcome.failures[0].category == "backend"

    def test_missing_mapping_is_prerequisite_error(self):
        items = [make_item("q0"), make_item("q1")]
        chunk = make_chunk()
        partial = mappings_for(items[:1], chunk)
        with pytest.raises(PrerequisiteError):
            generate_set(items, partial, {chunk.chunk_id: chunk}, gen_client())

    def test_concurrent_run_matches_serial(self):
        items = [make_item(f"q{i:02d}") for i in range(8)]
        chunk = make_chunk()
        mappings = mappings_for(items, chunk)
        chunks = {chunk.chunk_id: chunk}
        serial = generate_set(items, mappings, chunks, gen_client(), workers=1)
        parallel = generate_set(items, mappings, chunks, gen_client(), workers=4)
        assert serial.items == parallel.items
