"""TOST equivalence testing and the similarity decision rules.

Equivalence of a pair is computed two ways on every call: from the two
one-sided p-values (both < alpha) and from containment of the
(1 - 2*alpha)-level confidence interval strictly inside [-delta, +delta].
These formulations are exact duals; if they ever disagree the call raises an
internal error rather than picking one.

The equivalence margin delta is a multiple of a score-scale SD. Which SD
("sd_basis") is configurable: the pooled SD of the two compared samples
(default, the Hedges-g denominator), the reference (second) sample's SD, or
the SD of paired differences (paired comparisons only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigError, InternalCheckError
from .distributions import t_cdf, t_ppf
from .inference import cohens_dz, hedges_g, pooled_sd, sample_sd

SD_BASIS_CHOICES = ("pooled", "reference", "differences")
OMNIBUS_CHOICES = ("auto", "welch", "kruskal")


@dataclass(frozen=True)
class EquivalenceConfig:
    delta_sd_multiplier: float = 0.2
    alpha: float = 0.05
    ci_level: float = 0.90
    practical_threshold: int = 19
    strict_threshold: int = 24
    sd_basis: str = "pooled"
    omnibus: str = "auto"  # whole-set omnibus: auto-fallback, or force a test

    def validate(self) -> None:
        if not (0.0 < self.alpha < 0.5):
            raise ConfigError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if abs(self.ci_level - (1.0 - 2.0 * self.alpha)) > 1e-9:
            raise ConfigError(
                f"ci_level must equal 1 - 2*alpha = {1.0 - 2.0 * self.alpha}, "
                f"got {self.ci_level}"
            )
        if self.delta_sd_multiplier <= 0.0:
            raise ConfigError("delta_sd_multiplier must be > 0")
        if not (0 <= self.practical_threshold <= self.strict_threshold):
            raise ConfigError("need 0 <= practical_threshold <= strict_threshold")
        if self.sd_basis not in SD_BASIS_CHOICES:
            raise ConfigError(f"sd_basis must be one of {SD_BASIS_CHOICES}")
        if self.omnibus not in OMNIBUS_CHOICES:
            raise ConfigError(f"omnibus must be one of {OMNIBUS_CHOICES}")


@dataclass(frozen=True)
class PairwiseEquivalence:
    pair: str
    n_x: int
    n_y: int
    mean_diff: float
    sd_basis: float
    delta_abs: float
    effect_size: float | None
    effect_kind: str  # "dz" (paired) | "g" (independent)
    p_lower: float
    p_upper: float
    ci_low: float
    ci_high: float
    equivalent: bool
    degenerate: bool = False

    def to_record(self) -> dict:
        return {
            "pair": self.pair,
            "n": [self.n_x, self.n_y],
            "mean_diff": self.mean_diff,
            "sd_basis": self.sd_basis,
            "delta_abs": self.delta_abs,
            "effect_size": self.effect_size,
            "effect_kind": self.effect_kind,
            "p_lower": self.p_lower,
            "p_upper": self.p_upper,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "equivalent": self.equivalent,
            "degenerate": self.degenerate,
        }


def _verdict(
    p_lower: float,
    p_upper: float,
    ci_low: float,
    ci_high: float,
    delta_abs: float,
    alpha: float,
) -> bool:
    by_p = p_lower < alpha and p_upper < alpha
    by_ci = ci_low > -delta_abs and ci_high < delta_abs
    if by_p != by_ci:
        raise InternalCheckError(
            f"TOST formulations disagree: p=({p_lower}, {p_upper}) vs "
            f"CI=({ci_low}, {ci_high}) against delta={delta_abs}, alpha={alpha}"
        )
    return by_p


def _degenerate_result(
    pair: str,
    n_x: int,
    n_y: int,
    mean_diff: float,
    effect_kind: str,
) -> PairwiseEquivalence:
    """Zero-spread samples: the margin collapses to a point at zero."""
    equivalent = mean_diff == 0.0
    p = 0.0 if equivalent else 1.0
    return PairwiseEquivalence(
        pair=pair,
        n_x=n_x,
        n_y=n_y,
        mean_diff=mean_diff,
        sd_basis=0.0,
        delta_abs=0.0,
        effect_size=None,
        effect_kind=effect_kind,
        p_lower=p,
        p_upper=p,
        ci_low=mean_diff,
        ci_high=mean_diff,
        equivalent=equivalent,
        degenerate=True,
    )


def _tost_from_moments(
    pair: str,
    n_x: int,
    n_y: int,
    mean_diff: float,
    se: float,
    df: float,
    sd_basis_value: float,
    effect_size: float | None,
    effect_kind: str,
    cfg: EquivalenceConfig,
) -> PairwiseEquivalence:
    delta_abs = cfg.delta_sd_multiplier * sd_basis_value
    degenerate = False
    if se == 0.0:
        # all mass at mean_diff: one-sided decisions are certainties
        degenerate = True
        p_lower = 0.0 if mean_diff > -delta_abs else 1.0
        p_upper = 0.0 if mean_diff < delta_abs else 1.0
        ci_low = ci_high = mean_diff
    else:
        p_lower = 1.0 - t_cdf((mean_diff + delta_abs) / se, df)
        p_upper = t_cdf((mean_diff - delta_abs) / se, df)
        t_crit = t_ppf(1.0 - cfg.alpha, df)
        ci_low = mean_diff - t_crit * se
        ci_high = mean_diff + t_crit * se
    equivalent = _verdict(p_lower, p_upper, ci_low, ci_high, delta_abs, cfg.alpha)
    return PairwiseEquivalence(
        pair=pair,
        n_x=n_x,
        n_y=n_y,
        mean_diff=mean_diff,
        sd_basis=sd_basis_value,
        delta_abs=delta_abs,
        effect_size=effect_size,
        effect_kind=effect_kind,
        p_lower=p_lower,
        p_upper=p_upper,
        ci_low=ci_low,
        ci_high=ci_high,
        equivalent=equivalent,
        degenerate=degenerate,
    )


def tost_paired(
    x: Sequence[float],
    y: Sequence[float],
    cfg: EquivalenceConfig,
    pair: str = "x-y",
) -> PairwiseEquivalence:
    """Paired-sample TOST on x - y."""
    cfg.validate()
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    if ax.shape != ay.shape or ax.ndim != 1:
        raise ValueError("paired samples must be equal-length vectors")
    n = ax.size
    if n < 3:
        raise ValueError(f"need n >= 3 pairs, got {n}")
    diffs = ax - ay
    mean_diff = float(np.mean(diffs))
    sd_diff = sample_sd(diffs)

    if cfg.sd_basis == "pooled":
        basis = pooled_sd(ax, ay)
    elif cfg.sd_basis == "reference":
        basis = sample_sd(ay)
    else:
        basis = sd_diff
    if basis == 0.0:
        return _degenerate_result(pair, n, n, mean_diff, "dz")

    effect = None if sd_diff == 0.0 else cohens_dz(diffs)
    se = sd_diff / math.sqrt(n)
    return _tost_from_moments(
        pair, n, n, mean_diff, se, n - 1, basis, effect, "dz", cfg
    )


def tost_independent(
    x: Sequence[float],
    y: Sequence[float],
    cfg: EquivalenceConfig,
    pair: str = "x-y",
) -> PairwiseEquivalence:
    """Independent-sample TOST with Welch standard error and df."""
    cfg.validate()
    if cfg.sd_basis == "differences":
        raise ConfigError("sd_basis 'differences' is undefined for independent samples")
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    if ax.ndim != 1 or ay.ndim != 1:
        raise ValueError("samples must be vectors")
    if ax.size < 3 or ay.size < 3:
        raise ValueError(f"need n >= 3 per group, got ({ax.size}, {ay.size})")
    mean_diff = float(np.mean(ax)) - float(np.mean(ay))

    s_pooled = pooled_sd(ax, ay)
    basis = s_pooled if cfg.sd_basis == "pooled" else sample_sd(ay)
    if basis == 0.0:
        return _degenerate_result(pair, ax.size, ay.size, mean_diff, "g")

    vx = float(np.var(ax, ddof=1))
    vy = float(np.var(ay, ddof=1))
    se2 = vx / ax.size + vy / ay.size
    se = math.sqrt(se2)
    df = se2**2 / (
        (vx / ax.size) ** 2 / (ax.size - 1) + (vy / ay.size) ** 2 / (ay.size - 1)
    )
    effect = None if s_pooled == 0.0 else hedges_g(ax, ay)
    return _tost_from_moments(
        pair, ax.size, ay.size, mean_diff, se, df, basis, effect, "g", cfg
    )


@dataclass(frozen=True)
class CriterionVerdict:
    criterion_id: str
    judge_id: str
    track: str  # "matched" | "whole"
    pairwise: tuple[PairwiseEquivalence, ...]
    equivalent: bool = field(init=False)

    def __post_init__(self) -> None:
        if len(self.pairwise) != 3:
            raise ValueError(f"expected exactly 3 pairwise results, got {len(self.pairwise)}")
        object.__setattr__(self, "equivalent", all(p.equivalent for p in self.pairwise))


def criterion_verdict(
    criterion_id: str,
    judge_id: str,
    track: str,
    pairwise: Sequence[PairwiseEquivalence],
) -> CriterionVerdict:
    """A criterion is equivalent iff all three pairwise comparisons are."""
    return CriterionVerdict(criterion_id, judge_id, track, tuple(pairwise))


def similarity_decision(equivalent_count: int, cfg: EquivalenceConfig) -> str:
    """Decision rule over the per-criterion verdict count."""
    cfg.validate()
    if not (0 <= equivalent_count <= cfg.strict_threshold):
        raise ValueError(
            f"count must be in 0..{cfg.strict_threshold}, got {equivalent_count}"
        )
    if equivalent_count == cfg.strict_threshold:
        return "strict"
    if equivalent_count >= cfg.practical_threshold:
        return "practical"
    return "neither"
