"""The two analysis tracks over per-judge evaluation scores.

Matched track: paired machinery (Friedman omnibus, Wilcoxon pairwise with
Holm, Cohen's dz, paired TOST) restricted to question_ids present in all
three sets for a judge. Whole-set track: independent machinery (Welch ANOVA
with a Kruskal-Wallis fallback, Welch pairwise with Holm, Hedges' g,
independent TOST) over all available items per set.

Category-level analyses run the same machinery on per-item category values:
each criterion is z-scored over the pooled sample of all three sets, and an
item's category value is the mean of its member-criterion z-scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import DegenerateDataError
from ..rubric import RubricRegistry
from .equivalence import (
    EquivalenceConfig,
    PairwiseEquivalence,
    similarity_decision,
    tost_independent,
    tost_paired,
)
from .inference import (
    cohens_dz,
    friedman,
    hedges_g,
    holm_adjust,
    kruskal_wallis,
    welch_anova,
    welch_t,
    wilcoxon_signed_rank,
)

MATCHED = "matched"
WHOLE = "whole"


@dataclass(frozen=True)
class SetScores:
    """All validated scores one judge produced for one item set."""

    set_id: str
    scores: Mapping[str, Mapping[str, float]]  # question_id -> criterion_id -> score

    @property
    def question_ids(self) -> set[str]:
        return set(self.scores)

    def restrict(self, qids: Sequence[str]) -> "SetScores":
        return SetScores(self.set_id, {q: self.scores[q] for q in qids})

    def criterion_vector(self, criterion_id: str, qids: Sequence[str]) -> np.ndarray:
        return np.array([self.scores[q][criterion_id] for q in qids], dtype=float)

    def criterion_values(self, criterion_id: str) -> np.ndarray:
        return self.criterion_vector(criterion_id, sorted(self.scores))


@dataclass(frozen=True)
class OmnibusResult:
    kind: str  # "friedman" | "welch_anova" | "kruskal_wallis"
    statistic: float
    df: tuple[float, ...]
    p_value: float
    degenerate: bool = False

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "statistic": self.statistic,
            "df": list(self.df),
            "p_value": self.p_value,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class DifferenceTest:
    pair: str
    kind: str  # "wilcoxon" | "welch_t"
    statistic: float
    p_value: float
    p_holm: float
    degenerate: bool = False

    def to_record(self) -> dict:
        return {
            "pair": self.pair,
            "kind": self.kind,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "p_holm": self.p_holm,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class CriterionAnalysis:
    criterion_id: str
    judge_id: str
    track: str
    omnibus: OmnibusResult
    difference_tests: tuple[DifferenceTest, ...]
    pairwise: tuple[PairwiseEquivalence, ...]
    equivalent: bool

    def to_record(self) -> dict:
        return {
            "criterion_id": self.criterion_id,
            "judge_id": self.judge_id,
            "track": self.track,
            "omnibus": self.omnibus.to_record(),
            "difference_tests": [t.to_record() for t in self.difference_tests],
            "pairwise": [p.to_record() for p in self.pairwise],
            "equivalent": self.equivalent,
        }


@dataclass(frozen=True)
class CategoryAnalysis:
    category: str
    judge_id: str
    track: str
    omnibus: OmnibusResult
    difference_tests: tuple[DifferenceTest, ...]
    pairwise: tuple[PairwiseEquivalence, ...]
    equivalent: bool
    zero_variance_criteria: tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {
            "category": self.category,
            "judge_id": self.judge_id,
            "track": self.track,
            "omnibus": self.omnibus.to_record(),
            "difference_tests": [t.to_record() for t in self.difference_tests],
            "pairwise": [p.to_record() for p in self.pairwise],
            "equivalent": self.equivalent,
            "zero_variance_criteria": list(self.zero_variance_criteria),
        }


@dataclass(frozen=True)
class TrackResult:
    judge_id: str
    track: str
    set_ns: Mapping[str, int]
    criteria: tuple[CriterionAnalysis, ...]
    categories: tuple[CategoryAnalysis, ...]
    equivalent_criteria_count: int
    equivalent_categories_count: int
    decision: str

    def criterion_verdicts(self) -> dict[str, bool]:
        return {c.criterion_id: c.equivalent for c in self.criteria}

    def to_record(self) -> dict:
        return {
            "judge_id": self.judge_id,
            "track": self.track,
            "set_ns": dict(self.set_ns),
            "criteria": [c.to_record() for c in self.criteria],
            "categories": [c.to_record() for c in self.categories],
            "equivalent_criteria_count": self.equivalent_criteria_count,
            "equivalent_categories_count": self.equivalent_categories_count,
            "decision": self.decision,
        }


def _pairs(
    gen_a: SetScores, gen_b: SetScores, baseline: SetScores
) -> tuple[tuple[str, SetScores, SetScores], ...]:
    """The three pairwise comparisons: each generated set against the
    baseline, then the two generated sets against each other."""
    return (
        (f"{gen_a.set_id}-{baseline.set_id}", gen_a, baseline),
        (f"{gen_b.set_id}-{baseline.set_id}", gen_b, baseline),
        (f"{gen_a.set_id}-{gen_b.set_id}", gen_a, gen_b),
    )


def category_scores(
    sets: Sequence[SetScores], registry: RubricRegistry
) -> tuple[dict[str, dict[str, dict[str, float]]], tuple[str, ...]]:
    """Per-item category values from pooled within-criterion z-scores.

    Returns ``values[set_id][question_id][category] -> value`` plus the ids of
    zero-variance criteria (which contribute z = 0 everywhere).
    """
    if not sets or any(not s.scores for s in sets):
        raise ValueError("every set must contain at least one scored item")
    stats: dict[str, tuple[float, float]] = {}
    flagged: list[str] = []
    for cid in registry.criterion_ids:
        pooled = np.concatenate([s.criterion_values(cid) for s in sets])
        mean = float(np.mean(pooled))
        sd = float(np.std(pooled, ddof=1)) if pooled.size > 1 else 0.0
        if sd == 0.0:
            flagged.append(cid)
        stats[cid] = (mean, sd)

    values: dict[str, dict[str, dict[str, float]]] = {}
    for s in sets:
        per_item: dict[str, dict[str, float]] = {}
        for qid in sorted(s.scores):
            row = s.scores[qid]
            per_cat: dict[str, float] = {}
            for cat in registry.categories:
                zs = []
                for cid in cat.criterion_ids:
                    mean, sd = stats[cid]
                    zs.append((row[cid] - mean) / sd if sd > 0.0 else 0.0)
                per_cat[cat.name] = float(np.mean(zs))
            per_item[qid] = per_cat
        values[s.set_id] = per_item
    return values, tuple(flagged)


def _paired_pair_analysis(
    pair: str,
    x: np.ndarray,
    y: np.ndarray,
    cfg: EquivalenceConfig,
) -> tuple[PairwiseEquivalence, DifferenceTest]:
    diffs = x - y
    wres = wilcoxon_signed_rank(diffs)
    diff_test = DifferenceTest(
        pair=pair,
        kind="wilcoxon",
        statistic=wres.statistic,
        p_value=wres.p_value,
        p_holm=wres.p_value,  # filled in after the Holm pass over all pairs
        degenerate=wres.degenerate,
    )
    equiv = tost_paired(x, y, cfg, pair=pair)
    return equiv, diff_test


def _independent_pair_analysis(
    pair: str,
    x: np.ndarray,
    y: np.ndarray,
    cfg: EquivalenceConfig,
) -> tuple[PairwiseEquivalence, DifferenceTest]:
    try:
        tres = welch_t(x, y)
        diff_test = DifferenceTest(pair, "welch_t", tres.statistic, tres.p_value, tres.p_value)
    except DegenerateDataError:
        diff_test = DifferenceTest(pair, "welch_t", 0.0, 1.0, 1.0, degenerate=True)
    equiv = tost_independent(x, y, cfg, pair=pair)
    return equiv, diff_test


def _apply_holm(tests: Sequence[DifferenceTest]) -> tuple[DifferenceTest, ...]:
    adjusted = holm_adjust([t.p_value for t in tests])
    return tuple(
        DifferenceTest(t.pair, t.kind, t.statistic, t.p_value, adj, t.degenerate)
        for t, adj in zip(tests, adjusted)
    )


def _matched_omnibus(columns: Sequence[np.ndarray]) -> OmnibusResult:
    res = friedman(np.column_stack(columns))
    return OmnibusResult("friedman", res.chi2, (float(res.df),), res.p_value, res.degenerate)


def _whole_omnibus(groups: Sequence[np.ndarray], cfg: EquivalenceConfig) -> OmnibusResult:
    use_kruskal = cfg.omnibus == "kruskal"
    if cfg.omnibus == "auto":
        use_kruskal = any(
            g.size < 2 or float(np.var(g, ddof=1)) == 0.0 for g in groups
        )
    if use_kruskal:
        res = kruskal_wallis(groups)
        return OmnibusResult(
            "kruskal_wallis", res.statistic, (float(res.df),), res.p_value, res.degenerate
        )
    wres = welch_anova(groups)
    return OmnibusResult(
        "welch_anova", wres.statistic, (float(wres.df1), wres.df2), wres.p_value
    )


def _summarize(
    judge_id: str,
    track: str,
    set_ns: Mapping[str, int],
    criteria: Sequence[CriterionAnalysis],
    categories: Sequence[CategoryAnalysis],
    cfg: EquivalenceConfig,
) -> TrackResult:
    n_crit = sum(1 for c in criteria if c.equivalent)
    n_cat = sum(1 for c in categories if c.equivalent)
    return TrackResult(
        judge_id=judge_id,
        track=track,
        set_ns=dict(set_ns),
        criteria=tuple(criteria),
        categories=tuple(categories),
        equivalent_criteria_count=n_crit,
        equivalent_categories_count=n_cat,
        decision=similarity_decision(n_crit, cfg),
    )


def matched_track(
    judge_id: str,
    baseline: SetScores,
    gen_a: SetScores,
    gen_b: SetScores,
    registry: RubricRegistry,
    cfg: EquivalenceConfig,
) -> TrackResult:
    """Paired analysis on the question_ids shared by all three sets."""
    cfg.validate()
    matched = sorted(baseline.question_ids & gen_a.question_ids & gen_b.question_ids)
    if not matched:
        raise ValueError("no overlapping question_ids across the three sets")

    sets = (gen_a.restrict(matched), gen_b.restrict(matched), baseline.restrict(matched))
    criteria: list[CriterionAnalysis] = []
    for cid in registry.criterion_ids:
        vectors = {s.set_id: s.criterion_vector(cid, matched) for s in sets}
        omnibus = _matched_omnibus([vectors[s.set_id] for s in sets])
        equivs: list[PairwiseEquivalence] = []
        diffs: list[DifferenceTest] = []
        for pair, sx, sy in _pairs(*sets[:2], sets[2]):
            equiv, diff = _paired_pair_analysis(pair, vectors[sx.set_id], vectors[sy.set_id], cfg)
            equivs.append(equiv)
            diffs.append(diff)
        criteria.append(
            CriterionAnalysis(
                criterion_id=cid,
                judge_id=judge_id,
                track=MATCHED,
                omnibus=omnibus,
                difference_tests=_apply_holm(diffs),
                pairwise=tuple(equivs),
                equivalent=all(e.equivalent for e in equivs),
            )
        )

    cat_values, flagged = category_scores(sets, registry)
    categories: list[CategoryAnalysis] = []
    for cat in registry.categories:
        vectors = {
            s.set_id: np.array([cat_values[s.set_id][q][cat.name] for q in matched])
            for s in sets
        }
        omnibus = _matched_omnibus([vectors[s.set_id] for s in sets])
        equivs, diffs = [], []
        for pair, sx, sy in _pairs(*sets[:2], sets[2]):
            equiv, diff = _paired_pair_analysis(pair, vectors[sx.set_id], vectors[sy.set_id], cfg)
            equivs.append(equiv)
            diffs.append(diff)
        categories.append(
            CategoryAnalysis(
                category=cat.name,
                judge_id=judge_id,
                track=MATCHED,
                omnibus=omnibus,
                difference_tests=_apply_holm(diffs),
                pairwise=tuple(equivs),
                equivalent=all(e.equivalent for e in equivs),
                zero_variance_criteria=tuple(
                    c for c in flagged if c in cat.criterion_ids
                ),
            )
        )

    set_ns = {s.set_id: len(matched) for s in sets}
    return _summarize(judge_id, MATCHED, set_ns, criteria, categories, cfg)


def whole_track(
    judge_id: str,
    baseline: SetScores,
    gen_a: SetScores,
    gen_b: SetScores,
    registry: RubricRegistry,
    cfg: EquivalenceConfig,
) -> TrackResult:
    """Unpaired analysis over all available items per set."""
    cfg.validate()
    sets = (gen_a, gen_b, baseline)
    if any(not s.scores for s in sets):
        raise ValueError("every set must contain at least one scored item")

    criteria: list[CriterionAnalysis] = []
    for cid in registry.criterion_ids:
        vectors = {s.set_id: s.criterion_values(cid) for s in sets}
        omnibus = _whole_omnibus([vectors[s.set_id] for s in sets], cfg)
        equivs, diffs = [], []
        for pair, sx, sy in _pairs(*sets[:2], sets[2]):
            equiv, diff = _independent_pair_analysis(
                pair, vectors[sx.set_id], vectors[sy.set_id], cfg
            )
            equivs.append(equiv)
            diffs.append(diff)
        criteria.append(
            CriterionAnalysis(
                criterion_id=cid,
                judge_id=judge_id,
                track=WHOLE,
                omnibus=omnibus,
                difference_tests=_apply_holm(diffs),
                pairwise=tuple(equivs),
                equivalent=all(e.equivalent for e in equivs),
            )
        )

    cat_values, flagged = category_scores(sets, registry)
    categories: list[CategoryAnalysis] = []
    for cat in registry.categories:
        vectors = {
            s.set_id: np.array(
                [cat_values[s.set_id][q][cat.name] for q in sorted(s.scores)]
            )
            for s in sets
        }
        omnibus = _whole_omnibus([vectors[s.set_id] for s in sets], cfg)
        equivs, diffs = [], []
        for pair, sx, sy in _pairs(*sets[:2], sets[2]):
            equiv, diff = _independent_pair_analysis(
                pair, vectors[sx.set_id], vectors[sy.set_id], cfg
            )
            equivs.append(equiv)
            diffs.append(diff)
        categories.append(
            CategoryAnalysis(
                category=cat.name,
                judge_id=judge_id,
                track=WHOLE,
                omnibus=omnibus,
                difference_tests=_apply_holm(diffs),
                pairwise=tuple(equivs),
                equivalent=all(e.equivalent for e in equivs),
                zero_variance_criteria=tuple(
                    c for c in flagged if c in cat.criterion_ids
                ),
            )
        )

    set_ns = {s.set_id: len(s.scores) for s in sets}
    return _summarize(judge_id, WHOLE, set_ns, criteria, categories, cfg)


@dataclass(frozen=True)
class AgreementResult:
    matching: int
    total: int

    @property
    def fraction(self) -> float:
        return self.matching / self.total

    def to_record(self) -> dict:
        return {
            "matching": self.matching,
            "total": self.total,
            "fraction": self.fraction,
        }


def track_agreement(
    verdicts_matched: Mapping[str, bool], verdicts_whole: Mapping[str, bool]
) -> AgreementResult:
    """Proportion of criteria with the same verdict under both tracks."""
    if set(verdicts_matched) != set(verdicts_whole):
        raise ValueError("tracks cover different criterion sets")
    if not verdicts_matched:
        raise ValueError("empty verdict sets")
    matching = sum(
        1 for cid, v in verdicts_matched.items() if v == verdicts_whole[cid]
    )
    return AgreementResult(matching=matching, total=len(verdicts_matched))
