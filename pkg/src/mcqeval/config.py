"""Run configuration: one YAML file describing paths, stages, and backends.

Relative paths are resolved against the config file's directory. Validation
happens at load time; the config hash (over the canonical JSON form) doubles
as the run id so re-runs with identical configuration are recognizable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .backends import BackendDescriptor, RetryPolicy
from .chunking import ChunkConfig
from .corpus import DEFAULT_INCOMPLETE_PATTERNS
from .errors import ConfigError
from .mapping import MappingConfig
from .stats.equivalence import EquivalenceConfig


@dataclass(frozen=True)
class RunPaths:
    baseline_set: Path
    textbook_dir: Path
    output_dir: Path

    def validate(self) -> None:
        if not self.baseline_set.is_file():
            raise ConfigError(f"baseline_set does not exist: {self.baseline_set}")
        if not self.textbook_dir.is_dir():
            raise ConfigError(f"textbook_dir does not exist: {self.textbook_dir}")


@dataclass(frozen=True)
class GenerationSettings:
    prompt_budget: int = 8_000
    max_reasks: int = 2


@dataclass(frozen=True)
class JudgingSettings:
    max_reasks: int = 1


@dataclass(frozen=True)
class RunConfig:
    seed: int
    paths: RunPaths
    chunking: ChunkConfig
    mapping: MappingConfig
    equivalence: EquivalenceConfig
    filter_patterns: tuple[str, ...]
    embedder: BackendDescriptor
    generators: tuple[BackendDescriptor, ...]
    judges: tuple[BackendDescriptor, ...]
    generation: GenerationSettings = field(default_factory=GenerationSettings)
    judging: JudgingSettings = field(default_factory=JudgingSettings)
    failure_threshold: float = 0.10
    workers: int = 4
    raw: Mapping[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        self.paths.validate()
        self.chunking.validate()
        self.mapping.validate()
        self.equivalence.validate()
        self.embedder.validate()
        if self.embedder.kind != "embedding":
            raise ConfigError("embedder backend must have kind 'embedding'")
        for descr in self.generators + self.judges:
            descr.validate()
            if descr.kind != "chat":
                raise ConfigError(f"backend {descr.backend_id} must have kind 'chat'")
        ids = [d.backend_id for d in (self.embedder, *self.generators, *self.judges)]
        if len(ids) != len(set(ids)):
            raise ConfigError(f"backend_ids must be unique within a run: {ids}")
        if not self.generators:
            raise ConfigError("at least one generator backend is required")
        if not self.judges:
            raise ConfigError("at least one judge backend is required")
        if not (0.0 <= self.failure_threshold <= 1.0):
            raise ConfigError("failure_threshold must be in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    @property
    def run_id(self) -> str:
        return self.config_hash

    def set_ids(self) -> list[str]:
        """Canonical set order: baseline first, then generators in config order."""
        return ["baseline"] + [g.backend_id for g in self.generators]

    def judge_ids(self) -> list[str]:
        return [j.backend_id for j in self.judges]


def _parse_backend(raw: Mapping[str, Any], default_seed: int) -> BackendDescriptor:
    retry_raw = raw.get("retry") or {}
    retry = RetryPolicy(
        max_attempts=int(retry_raw.get("max_attempts", 3)),
        base_delay=float(retry_raw.get("base_delay", 1.0)),
        max_delay=float(retry_raw.get("max_delay", 30.0)),
        jitter=bool(retry_raw.get("jitter", True)),
    )
    failures = raw.get("mock_failures") or {}
    return BackendDescriptor(
        backend_id=str(raw["backend_id"]),
        kind=str(raw["kind"]),
        model_name=str(raw.get("model_name", raw["backend_id"])),
        endpoint=str(raw.get("endpoint", "mock")),
        requests_per_minute=int(raw.get("requests_per_minute", 0)),
        retry=retry,
        seed=int(raw.get("seed", default_seed)),
        embedding_dim=int(raw.get("embedding_dim", 48)),
        api_key_env=raw.get("api_key_env"),
        temperature=float(raw.get("temperature", 0.0)),
        max_output_tokens=int(raw.get("max_output_tokens", 1024)),
        mock_failures=tuple(sorted((str(k), str(v)) for k, v in failures.items())),
    )


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    if not isinstance(raw, Mapping):
        raise ConfigError(f"config {path} must be a mapping")

    base = path.resolve().parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else (base / candidate).resolve()

    try:
        seed = int(raw.get("seed", 0))
        paths_raw = raw["paths"]
        paths = RunPaths(
            baseline_set=resolve(str(paths_raw["baseline_set"])),
            textbook_dir=resolve(str(paths_raw["textbook_dir"])),
            output_dir=resolve(str(paths_raw["output_dir"])),
        )
        chunk_raw = raw.get("chunking") or {}
        chunking = ChunkConfig(
            min_tokens=int(chunk_raw.get("min_tokens", 120)),
            max_tokens=int(chunk_raw.get("max_tokens", 900)),
        )
        map_raw = raw.get("mapping") or {}
        mapping = MappingConfig(
            metadata_weight=float(map_raw.get("metadata_weight", 0.3)),
            content_weight=float(map_raw.get("content_weight", 0.7)),
            top_k=int(map_raw.get("top_k", 1)),
        )
        eq_raw = raw.get("equivalence") or {}
        alpha = float(eq_raw.get("alpha", 0.05))
        equivalence = EquivalenceConfig(
            delta_sd_multiplier=float(eq_raw.get("delta_sd_multiplier", 0.2)),
            alpha=alpha,
            ci_level=float(eq_raw.get("ci_level", 1.0 - 2.0 * alpha)),
            practical_threshold=int(eq_raw.get("practical_threshold", 19)),
            strict_threshold=int(eq_raw.get("strict_threshold", 24)),
            sd_basis=str(eq_raw.get("sd_basis", "pooled")),
            omnibus=str(eq_raw.get("omnibus", "auto")),
        )
        backends_raw = raw["backends"]
        embedder = _parse_backend(backends_raw["embedder"], seed)
        generators = tuple(
            _parse_backend(g, seed) for g in backends_raw.get("generators", [])
        )
        judges = tuple(_parse_backend(j, seed) for j in backends_raw.get("judges", []))
        gen_raw = raw.get("generation") or {}
        generation = GenerationSettings(
            prompt_budget=int(gen_raw.get("prompt_budget", 8_000)),
            max_reasks=int(gen_raw.get("max_reasks", 2)),
        )
        judge_raw = raw.get("judging") or {}
        judging = JudgingSettings(max_reasks=int(judge_raw.get("max_reasks", 1)))
        patterns = tuple(
            str(p) for p in raw.get("filter_patterns", DEFAULT_INCOMPLETE_PATTERNS)
        )
        cfg = RunConfig(
            seed=seed,
            paths=paths,
            chunking=chunking,
            mapping=mapping,
            equivalence=equivalence,
            filter_patterns=patterns,
            embedder=embedder,
            generators=generators,
            judges=judges,
            generation=generation,
            judging=judging,
            failure_threshold=float(raw.get("failure_threshold", 0.10)),
            workers=int(raw.get("workers", 4)),
            raw=dict(raw),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
    cfg.validate()
    return cfg
