"""Stage orchestration: artifacts on disk, a manifest, and cache-hit no-ops.

Each stage reads only prior-stage artifacts plus the config, writes its
outputs, and records a manifest entry carrying the input content hashes and
counts. Re-running a stage whose inputs and config section are unchanged is a
no-op unless forced. Artifacts are plain JSON/JSON Lines files.
"""

from __future__ import annotations

import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .backends import (
    CachedEmbedderAdapter,
    ProvenanceLog,
    build_chat_client,
    build_embedding_client,
)
from .chunking import chunk_markdown
from .config import RunConfig
from .corpus import apply_filter, incomplete_item_filter, ingest_mcq_set
from .errors import (
    ConfigError,
    FailureThresholdExceeded,
    PrerequisiteError,
)
from .generation import generate_set
from .judging import Evaluation, criterion_means, judge_set, summarize_cell
from .mapping import CachingEmbedder, ChunkIndex, EmbeddingCache, MappingResult, map_item
from .models import BASELINE_TAG, Chunk, MCQItem
from .report import render_reports
from .rubric import load_rubric
from .stats.tracks import SetScores, matched_track, track_agreement, whole_track

log = logging.getLogger("mcqeval")

STAGE_ORDER = ("ingest", "chunk", "map", "generate", "judge", "analyze", "report")


def _hash_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _hash_obj(obj: Any) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()[:16]


def _write_jsonl(path: Path, records: Iterable[Mapping]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    with path.open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class Pipeline:
    def __init__(self, cfg: RunConfig) -> None:
        cfg.validate()
        self.cfg = cfg
        self.out = cfg.paths.output_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.out / "manifest.json"
        self.manifest = self._load_manifest()
        self.provenance_log = ProvenanceLog(self.out / "provenance.jsonl")

    # -- manifest -----------------------------------------------------------

    def _load_manifest(self) -> dict:
        if self.manifest_path.exists():
            manifest = json.loads(self.manifest_path.read_text(encoding="utf-8"))
            if manifest.get("config_hash") != self.cfg.config_hash:
                # config changed: prior stage signatures are stale
                manifest = {"stages": {}}
        else:
            manifest = {"stages": {}}
        manifest["run_id"] = self.cfg.run_id
        manifest["config_hash"] = self.cfg.config_hash
        manifest["config"] = dict(self.cfg.raw)
        manifest.setdefault("stages", {})
        return manifest

    def _save_manifest(self) -> None:
        _write_json(self.manifest_path, self.manifest)

    def _stage_done(
        self, stage: str, signature: str, outputs: Sequence[Path], counts: Mapping
    ) -> None:
        self.manifest["stages"][stage] = {
            "signature": signature,
            "inputs_signature": signature,
            "outputs": [str(p.relative_to(self.out)) for p in outputs],
            "counts": dict(counts),
            "status": "ok",
            "completed_at": datetime.now(timezone.utc).isoformat(),
        }
        self._save_manifest()

    def _is_cached(self, stage: str, signature: str, force: bool) -> bool:
        if force:
            return False
        entry = self.manifest["stages"].get(stage)
        if not entry or entry.get("signature") != signature:
            return False
        if not all((self.out / rel).exists() for rel in entry.get("outputs", [])):
            return False
        entry["status"] = "cached"
        self._save_manifest()
        log.info("stage %s: inputs unchanged, cache hit", stage)
        return True

    def _require(self, stage: str, *paths: Path) -> None:
        missing = [str(p) for p in paths if not p.exists()]
        if missing:
            raise PrerequisiteError(f"stage {stage} needs missing artifacts: {missing}")

    # -- artifact paths ------------------------------------------------------

    @property
    def items_path(self) -> Path:
        return self.out / "ingest" / "items.jsonl"

    @property
    def chunks_path(self) -> Path:
        return self.out / "chunks" / "chunks.jsonl"

    @property
    def mappings_path(self) -> Path:
        return self.out / "map" / "mappings.jsonl"

    def generated_items_path(self, generator: str) -> Path:
        return self.out / "generate" / f"items__{generator}.jsonl"

    def evaluations_path(self, judge: str, set_id: str) -> Path:
        return self.out / "judge" / f"evaluations__{judge}__{set_id}.jsonl"

    @property
    def aggregates_path(self) -> Path:
        return self.out / "analyze" / "aggregates.json"

    @property
    def analysis_path(self) -> Path:
        return self.out / "analyze" / "analysis.json"

    # -- artifact loading ----------------------------------------------------

    def _load_items(self, path: Path) -> list[MCQItem]:
        return [MCQItem.from_record(rec) for rec in _read_jsonl(path)]

    def _load_chunks(self) -> dict[str, Chunk]:
        return {
            rec["chunk_id"]: Chunk.from_record(rec)
            for rec in _read_jsonl(self.chunks_path)
        }

    def _load_mappings(self) -> dict[str, MappingResult]:
        return {
            rec["question_id"]: MappingResult.from_record(rec)
            for rec in _read_jsonl(self.mappings_path)
        }

    # -- stages ---------------------------------------------------------------

    def stage_ingest(self, force: bool = False) -> None:
        cfg = self.cfg
        signature = _hash_obj(
            {
                "baseline": _hash_file(cfg.paths.baseline_set),
                "patterns": list(cfg.filter_patterns),
            }
        )
        if self._is_cached("ingest", signature, force):
            return
        result = ingest_mcq_set(cfg.paths.baseline_set, BASELINE_TAG)
        report = incomplete_item_filter(result.items, cfg.filter_patterns)
        retained = apply_filter(result.items, report)
        ingest_dir = self.out / "ingest"
        _write_jsonl(self.items_path, (item.to_record() for item in retained))
        _write_jsonl(
            ingest_dir / "skipped.jsonl",
            ({"ref": ref, "reason": reason} for ref, reason in result.skipped),
        )
        _write_jsonl(ingest_dir / "filter_report.jsonl", [report.to_record()])
        counts = {
            "ingested": len(result.items),
            "skipped": len(result.skipped),
            "filter_removed": len(report.removed),
            "retained": len(retained),
        }
        log.info("stage ingest: %s", counts)
        self._stage_done(
            "ingest",
            signature,
            [self.items_path, ingest_dir / "skipped.jsonl", ingest_dir / "filter_report.jsonl"],
            counts,
        )

    def stage_chunk(self, force: bool = False) -> None:
        cfg = self.cfg
        books = sorted(cfg.paths.textbook_dir.glob("*.md"))
        if not books:
            raise PrerequisiteError(f"no .md textbooks in {cfg.paths.textbook_dir}")
        signature = _hash_obj(
            {
                "books": {b.name: _hash_file(b) for b in books},
                "chunking": [cfg.chunking.min_tokens, cfg.chunking.max_tokens],
            }
        )
        if self._is_cached("chunk", signature, force):
            return
        all_chunks: list[Chunk] = []
        for book in books:
            doc = book.read_text(encoding="utf-8")
            all_chunks.extend(chunk_markdown(doc, book.stem, cfg.chunking))
        _write_jsonl(self.chunks_path, (c.to_record() for c in all_chunks))
        counts = {"books": len(books), "chunks": len(all_chunks)}
        log.info("stage chunk: %s", counts)
        self._stage_done("chunk", signature, [self.chunks_path], counts)

    def stage_map(self, force: bool = False) -> None:
        cfg = self.cfg
        self._require("map", self.items_path, self.chunks_path)
        signature = _hash_obj(
            {
                "items": _hash_file(self.items_path),
                "chunks": _hash_file(self.chunks_path),
                "mapping": [cfg.mapping.metadata_weight, cfg.mapping.content_weight, cfg.mapping.top_k],
                "embedder": cfg.embedder.backend_id,
            }
        )
        if self._is_cached("map", signature, force):
            return
        items = self._load_items(self.items_path)
        chunks = list(self._load_chunks().values())
        map_dir = self.out / "map"
        map_dir.mkdir(parents=True, exist_ok=True)
        cache = EmbeddingCache(map_dir / "embedding_cache.jsonl")
        client = build_embedding_client(cfg.embedder, self.provenance_log)
        embedder = CachingEmbedder(inner=CachedEmbedderAdapter(client), cache=cache)
        index = ChunkIndex.build(chunks, embedder)
        mappings = [map_item(item, index, cfg.mapping) for item in items]
        _write_jsonl(self.mappings_path, (m.to_record() for m in mappings))
        counts = {
            "items": len(items),
            "chunks": len(chunks),
            "cache_hits": cache.hits,
            "cache_misses": cache.misses,
        }
        log.info("stage map: %s", counts)
        self._stage_done("map", signature, [self.mappings_path], counts)

    def stage_generate(self, force: bool = False) -> None:
        cfg = self.cfg
        self._require("generate", self.items_path, self.chunks_path, self.mappings_path)
        signature = _hash_obj(
            {
                "items": _hash_file(self.items_path),
                "mappings": _hash_file(self.mappings_path),
                "generators": [
                    [g.backend_id, g.model_name, g.seed, list(g.mock_failures)]
                    for g in cfg.generators
                ],
                "generation": [cfg.generation.prompt_budget, cfg.generation.max_reasks],
            }
        )
        if self._is_cached("generate", signature, force):
            return
        baseline = self._load_items(self.items_path)
        chunks = self._load_chunks()
        mappings = self._load_mappings()
        outputs: list[Path] = []
        counts: dict[str, Any] = {}
        worst_failure_rate = 0.0
        for descr in cfg.generators:
            client = build_chat_client(descr, self.provenance_log)
            outcome = generate_set(
                baseline,
                mappings,
                chunks,
                client,
                budget=cfg.generation.prompt_budget,
                max_reasks=cfg.generation.max_reasks,
                workers=cfg.workers,
            )
            gen_items = self.generated_items_path(descr.backend_id)
            failures = self.out / "generate" / f"failures__{descr.backend_id}.jsonl"
            provenance = self.out / "generate" / f"provenance__{descr.backend_id}.jsonl"
            _write_jsonl(gen_items, (item.to_record() for item in outcome.items))
            _write_jsonl(failures, (f.to_record() for f in outcome.failures))
            _write_jsonl(
                provenance,
                (
                    {"question_id": qid, **rec.to_record()}
                    for qid, rec in sorted(outcome.provenance.items())
                ),
            )
            outputs += [gen_items, failures, provenance]
            counts[descr.backend_id] = {
                "generated": len(outcome.items),
                "failures": len(outcome.failures),
            }
            if baseline:
                worst_failure_rate = max(
                    worst_failure_rate, len(outcome.failures) / len(baseline)
                )
        log.info("stage generate: %s", counts)
        self._stage_done("generate", signature, outputs, counts)
        if worst_failure_rate > cfg.failure_threshold:
            raise FailureThresholdExceeded(
                f"generation failure rate {worst_failure_rate:.1%} exceeds "
                f"threshold {cfg.failure_threshold:.1%}"
            )

    def _judge_inputs(self) -> dict[str, list[MCQItem]]:
        """Items per set id: the baseline plus each generated set."""
        sets = {"baseline": self._load_items(self.items_path)}
        for descr in self.cfg.generators:
            path = self.generated_items_path(descr.backend_id)
            self._require("judge", path)
            sets[descr.backend_id] = self._load_items(path)
        return sets

    def stage_judge(self, force: bool = False) -> None:
        cfg = self.cfg
        self._require("judge", self.items_path, self.chunks_path, self.mappings_path)
        item_sets = self._judge_inputs()
        signature = _hash_obj(
            {
                "sets": {
                    set_id: _hash_obj([item.to_record() for item in items])
                    for set_id, items in item_sets.items()
                },
                "judges": [[j.backend_id, j.model_name, j.seed] for j in cfg.judges],
                "judging": [cfg.judging.max_reasks],
            }
        )
        if self._is_cached("judge", signature, force):
            return
        registry = load_rubric()
        chunks = self._load_chunks()
        mappings = self._load_mappings()

        def groundings_for(items: Sequence[MCQItem]) -> dict[str, Chunk]:
            found: dict[str, Chunk] = {}
            for item in items:
                chunk_id: str | None = None
                if item.grounding_chunk_ids:
                    chunk_id = item.grounding_chunk_ids[0]
                elif item.question_id in mappings:
                    chunk_id = mappings[item.question_id].best_chunk_id
                if chunk_id and chunk_id in chunks:
                    found[item.question_id] = chunks[chunk_id]
            return found

        outputs: list[Path] = []
        counts: dict[str, Any] = {}
        all_failures = []
        total_items = 0
        total_failures = 0
        for descr in cfg.judges:
            client = build_chat_client(descr, self.provenance_log)
            for set_id, items in item_sets.items():
                evaluations, failures = judge_set(
                    items,
                    registry,
                    client,
                    groundings_for(items),
                    max_reasks=cfg.judging.max_reasks,
                    workers=cfg.workers,
                )
                path = self.evaluations_path(descr.backend_id, set_id)
                _write_jsonl(path, (ev.to_record() for ev in evaluations))
                outputs.append(path)
                counts[f"{descr.backend_id}|{set_id}"] = {
                    "evaluated": len(evaluations),
                    "failures": len(failures),
                }
                all_failures.extend(failures)
                total_items += len(items)
                total_failures += len(failures)
        failures_path = self.out / "judge" / "failures.jsonl"
        _write_jsonl(failures_path, (f.to_record() for f in all_failures))
        outputs.append(failures_path)
        log.info("stage judge: %s", counts)
        self._stage_done("judge", signature, outputs, counts)
        if total_items and total_failures / total_items > cfg.failure_threshold:
            raise FailureThresholdExceeded(
                f"judging failure rate {total_failures / total_items:.1%} exceeds "
                f"threshold {cfg.failure_threshold:.1%}"
            )

    def stage_analyze(self, force: bool = False) -> None:
        cfg = self.cfg
        if len(cfg.generators) != 2:
            raise ConfigError(
                "analysis requires exactly two generated sets plus the baseline"
            )
        set_ids = cfg.set_ids()
        judge_ids = cfg.judge_ids()
        eval_paths = {
            (judge, set_id): self.evaluations_path(judge, set_id)
            for judge in judge_ids
            for set_id in set_ids
        }
        self._require("analyze", *eval_paths.values())
        signature = _hash_obj(
            {
                "evaluations": {
                    f"{j}|{s}": _hash_file(p) for (j, s), p in eval_paths.items()
                },
                "equivalence": [
                    cfg.equivalence.delta_sd_multiplier,
                    cfg.equivalence.alpha,
                    cfg.equivalence.ci_level,
                    cfg.equivalence.practical_threshold,
                    cfg.equivalence.strict_threshold,
                    cfg.equivalence.sd_basis,
                    cfg.equivalence.omnibus,
                ],
            }
        )
        if self._is_cached("analyze", signature, force):
            return
        registry = load_rubric()
        evaluations: dict[tuple[str, str], list[Evaluation]] = {
            key: [Evaluation.from_record(rec) for rec in _read_jsonl(path)]
            for key, path in eval_paths.items()
        }
        for evs in evaluations.values():
            if not evs:
                raise PrerequisiteError("an evaluation cell is empty; cannot analyze")

        cells = []
        for judge in judge_ids:
            for set_id in set_ids:
                evs = evaluations[(judge, set_id)]
                summary = summarize_cell(evs)
                means = criterion_means(evs, registry)
                cells.append({**summary.to_record(), **means.to_record()})
        aggregates = {"judges": judge_ids, "sets": set_ids, "cells": cells}
        _write_json(self.aggregates_path, aggregates)

        tracks = []
        agreements = []
        gen_a_id, gen_b_id = set_ids[1], set_ids[2]
        for judge in judge_ids:
            scores = {
                set_id: SetScores(
                    set_id,
                    {
                        ev.question_id: {k: float(v) for k, v in ev.scores.items()}
                        for ev in evaluations[(judge, set_id)]
                    },
                )
                for set_id in set_ids
            }
            matched = matched_track(
                judge, scores["baseline"], scores[gen_a_id], scores[gen_b_id],
                registry, cfg.equivalence,
            )
            whole = whole_track(
                judge, scores["baseline"], scores[gen_a_id], scores[gen_b_id],
                registry, cfg.equivalence,
            )
            agreement = track_agreement(
                matched.criterion_verdicts(), whole.criterion_verdicts()
            )
            tracks += [matched.to_record(), whole.to_record()]
            agreements.append({"judge_id": judge, **agreement.to_record()})
        analysis = {
            "rubric_version": registry.version,
            "equivalence_config": {
                "delta_sd_multiplier": cfg.equivalence.delta_sd_multiplier,
                "alpha": cfg.equivalence.alpha,
                "ci_level": cfg.equivalence.ci_level,
                "practical_threshold": cfg.equivalence.practical_threshold,
                "strict_threshold": cfg.equivalence.strict_threshold,
                "sd_basis": cfg.equivalence.sd_basis,
                "omnibus": cfg.equivalence.omnibus,
            },
            "judges": judge_ids,
            "sets": set_ids,
            "tracks": tracks,
            "agreements": agreements,
        }
        _write_json(self.analysis_path, analysis)
        counts = {
            f"{t['judge_id']}|{t['track']}": t["equivalent_criteria_count"]
            for t in tracks
        }
        log.info("stage analyze: %s", counts)
        self._stage_done(
            "analyze", signature, [self.aggregates_path, self.analysis_path], counts
        )

    def stage_report(self, force: bool = False) -> None:
        self._require("report", self.aggregates_path, self.analysis_path)
        signature = _hash_obj(
            {
                "aggregates": _hash_file(self.aggregates_path),
                "analysis": _hash_file(self.analysis_path),
            }
        )
        if self._is_cached("report", signature, force):
            return
        registry = load_rubric()
        aggregates = json.loads(self.aggregates_path.read_text(encoding="utf-8"))
        analysis = json.loads(self.analysis_path.read_text(encoding="utf-8"))
        reports_dir = self.out / "reports"
        bundle = render_reports(aggregates, analysis, registry, reports_dir, self.cfg.run_id)
        index_path = reports_dir / f"bundle__{self.cfg.run_id}.json"
        _write_json(index_path, bundle)
        outputs = [index_path] + [
            Path(p) for table in bundle.values() for p in table.values()
        ]
        counts = {"tables": len(bundle)}
        log.info("stage report: %s", counts)
        self._stage_done("report", signature, outputs, counts)

    def run(self, stage: str, force: bool = False) -> None:
        stages = STAGE_ORDER if stage == "all" else (stage,)
        for name in stages:
            getattr(self, f"stage_{name}")(force=force)


def run_stage(stage: str, cfg: RunConfig, force: bool = False) -> None:
    """Run one named stage (or 'all') against the given config."""
    if stage != "all" and stage not in STAGE_ORDER:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGE_ORDER + ('all',)}")
    Pipeline(cfg).run(stage, force=force)
