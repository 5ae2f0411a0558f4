"""Effect sizes, multiple-comparison correction, and the hypothesis tests.

Rank tests use mid-ranks with tie-corrected variances throughout; the
Wilcoxon signed-rank test is exact (distribution built by enumeration) for
effective n <= 20 and a continuity-corrected normal approximation above that.
Degenerate all-tied inputs yield p = 1 with a flag rather than an exception so
batch analyses stay robust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DegenerateDataError
from .distributions import chi2_cdf, f_cdf, normal_cdf, t_cdf

EXACT_WILCOXON_MAX_N = 20


def _as_array(values: Sequence[float], name: str, min_len: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size < min_len:
        raise ValueError(f"{name} needs at least {min_len} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def sample_sd(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1))


def pooled_sd(x: Sequence[float], y: Sequence[float]) -> float:
    """Pooled standard deviation (the Hedges-g denominator)."""
    ax = _as_array(x, "x", 2)
    ay = _as_array(y, "y", 2)
    df = ax.size + ay.size - 2
    ss = (ax.size - 1) * np.var(ax, ddof=1) + (ay.size - 1) * np.var(ay, ddof=1)
    return float(math.sqrt(ss / df))


def midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values receiving the mean of their rank block."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=float)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0  # mean of ranks i+1 .. j+1
        i = j + 1
    return ranks


def _tie_term(values: np.ndarray) -> float:
    """Sum of t^3 - t over tie groups."""
    _, counts = np.unique(values, return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


def cohens_dz(diffs: Sequence[float]) -> float:
    """Paired effect size: mean of differences over their sample SD."""
    d = _as_array(diffs, "diffs", 2)
    sd = sample_sd(d)
    if sd == 0.0:
        raise DegenerateDataError("differences have zero variance")
    return float(np.mean(d)) / sd


def hedges_g(x: Sequence[float], y: Sequence[float]) -> float:
    """Bias-corrected standardized mean difference for independent samples."""
    ax = _as_array(x, "x", 2)
    ay = _as_array(y, "y", 2)
    sp = pooled_sd(ax, ay)
    if sp == 0.0:
        raise DegenerateDataError("pooled SD is zero")
    df = ax.size + ay.size - 2
    correction = 1.0 - 3.0 / (4.0 * df - 1.0)
    return (float(np.mean(ax)) - float(np.mean(ay))) / sp * correction


def holm_adjust(pvalues: Sequence[float]) -> list[float]:
    """Step-down Holm adjustment, monotone-enforced, returned in input order."""
    ps = list(float(p) for p in pvalues)
    for p in ps:
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"p-value out of [0, 1]: {p}")
    m = len(ps)
    order = sorted(range(m), key=ps.__getitem__)
    adjusted = [0.0] * m
    running = 0.0
    for rank, idx in enumerate(order):
        value = min(1.0, (m - rank) * ps[idx])
        running = max(running, value)
        adjusted[idx] = running
    return adjusted


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # W+: sum of ranks of positive differences
    p_value: float
    n_effective: int
    method: str  # "exact" | "normal" | "degenerate"
    degenerate: bool = False


def _wilcoxon_exact_counts(double_ranks: list[int], w2_obs: int) -> tuple[int, int]:
    """Counts of sign assignments with W+ <= / >= observed (ranks doubled).

    Dynamic program over achievable doubled rank sums; equivalent to full
    enumeration of the 2^n assignments but polynomial.
    """
    total = sum(double_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in double_ranks:
        for s in range(total - r, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
    n_le = sum(counts[: w2_obs + 1])
    n_ge = sum(counts[w2_obs:])
    return n_le, n_ge


def wilcoxon_signed_rank(diffs: Sequence[float]) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired differences."""
    d = _as_array(diffs, "diffs", 1)
    nonzero = d[d != 0.0]
    n = int(nonzero.size)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "degenerate", degenerate=True)

    abs_ranks = midranks(np.abs(nonzero))
    w_plus = float(np.sum(abs_ranks[nonzero > 0]))

    if n <= EXACT_WILCOXON_MAX_N:
        double_ranks = [int(round(2.0 * r)) for r in abs_ranks]
        w2 = int(round(2.0 * w_plus))
        n_le, n_ge = _wilcoxon_exact_counts(double_ranks, w2)
        denom = 2**n
        p = min(1.0, 2.0 * min(n_le, n_ge) / denom)
        return WilcoxonResult(w_plus, p, n, "exact")

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term(np.abs(nonzero)) / 48.0
    if var <= 0.0:
        return WilcoxonResult(w_plus, 1.0, n, "degenerate", degenerate=True)
    delta = w_plus - mean
    # continuity correction shrinks |delta| by 0.5 toward the null mean
    corrected = math.copysign(max(abs(delta) - 0.5, 0.0), delta)
    z = corrected / math.sqrt(var)
    p = min(1.0, 2.0 * (1.0 - normal_cdf(abs(z))))
    return WilcoxonResult(w_plus, p, n, "normal")


@dataclass(frozen=True)
class FriedmanResult:
    chi2: float
    df: int
    p_value: float
    degenerate: bool = False


def friedman(scores: Sequence[Sequence[float]]) -> FriedmanResult:
    """Friedman omnibus test on an n-rows x k-conditions matrix."""
    matrix = np.asarray(scores, dtype=float)
    if matrix.ndim != 2:
        raise ValueError("scores must be a 2-D matrix")
    n, k = matrix.shape
    if n < 2 or k < 2:
        raise ValueError(f"need n >= 2 rows and k >= 2 conditions, got {n}x{k}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("scores contain non-finite values (rows must be complete)")

    ranks = np.vstack([midranks(row) for row in matrix])
    rank_sums = ranks.sum(axis=0)
    chi2 = 12.0 / (n * k * (k + 1)) * float(np.sum(rank_sums**2)) - 3.0 * n * (k + 1)
    tie_sum = sum(_tie_term(row) for row in matrix)
    correction = 1.0 - tie_sum / (n * k * (k * k - 1))
    if correction <= 0.0:
        # every row fully tied: no information, declare the null
        return FriedmanResult(0.0, k - 1, 1.0, degenerate=True)
    chi2 /= correction
    chi2 = max(chi2, 0.0)
    return FriedmanResult(chi2, k - 1, 1.0 - chi2_cdf(chi2, k - 1))


@dataclass(frozen=True)
class WelchTResult:
    statistic: float
    df: float
    p_value: float


def welch_t(x: Sequence[float], y: Sequence[float]) -> WelchTResult:
    """Welch's unequal-variance two-sample t-test (two-sided)."""
    ax = _as_array(x, "x", 2)
    ay = _as_array(y, "y", 2)
    vx = float(np.var(ax, ddof=1))
    vy = float(np.var(ay, ddof=1))
    if vx == 0.0 and vy == 0.0:
        raise DegenerateDataError("both groups have zero variance")
    nx, ny = ax.size, ay.size
    se2 = vx / nx + vy / ny
    t = (float(np.mean(ax)) - float(np.mean(ay))) / math.sqrt(se2)
    df = se2**2 / ((vx / nx) ** 2 / (nx - 1) + (vy / ny) ** 2 / (ny - 1))
    p = min(1.0, 2.0 * (1.0 - t_cdf(abs(t), df)))
    return WelchTResult(t, df, p)


@dataclass(frozen=True)
class WelchAnovaResult:
    statistic: float
    df1: int
    df2: float
    p_value: float


def welch_anova(groups: Sequence[Sequence[float]]) -> WelchAnovaResult:
    """Welch's heteroscedastic one-way ANOVA."""
    arrays = [_as_array(g, f"group[{i}]", 2) for i, g in enumerate(groups)]
    k = len(arrays)
    if k < 2:
        raise ValueError(f"need k >= 2 groups, got {k}")
    variances = [float(np.var(a, ddof=1)) for a in arrays]
    if any(v == 0.0 for v in variances):
        raise DegenerateDataError("a group has zero variance; use the rank fallback")

    ns = np.array([a.size for a in arrays], dtype=float)
    means = np.array([float(np.mean(a)) for a in arrays])
    weights = ns / np.array(variances)
    w_total = float(weights.sum())
    grand = float(np.sum(weights * means)) / w_total

    numerator = float(np.sum(weights * (means - grand) ** 2)) / (k - 1)
    # lam > 0 whenever k >= 2 and all variances are finite and positive
    lam = float(np.sum((1.0 - weights / w_total) ** 2 / (ns - 1.0)))
    denominator = 1.0 + 2.0 * (k - 2) / (k * k - 1.0) * lam
    f_stat = numerator / denominator
    df2 = (k * k - 1.0) / (3.0 * lam)
    return WelchAnovaResult(f_stat, k - 1, df2, 1.0 - f_cdf(f_stat, k - 1, df2))


@dataclass(frozen=True)
class KruskalResult:
    statistic: float
    df: int
    p_value: float
    degenerate: bool = False


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> KruskalResult:
    """Kruskal-Wallis rank test with tie correction."""
    arrays = [_as_array(g, f"group[{i}]", 1) for i, g in enumerate(groups)]
    k = len(arrays)
    if k < 2:
        raise ValueError(f"need k >= 2 groups, got {k}")
    total_n = sum(a.size for a in arrays)
    if total_n < 3:
        raise ValueError(f"need total n >= 3, got {total_n}")

    pooled = np.concatenate(arrays)
    ranks = midranks(pooled)
    h = 0.0
    offset = 0
    for a in arrays:
        r_sum = float(np.sum(ranks[offset : offset + a.size]))
        h += r_sum * r_sum / a.size
        offset += a.size
    h = 12.0 / (total_n * (total_n + 1)) * h - 3.0 * (total_n + 1)
    correction = 1.0 - _tie_term(pooled) / (total_n**3 - total_n)
    if correction <= 0.0:
        return KruskalResult(0.0, k - 1, 1.0, degenerate=True)
    h /= correction
    h = max(h, 0.0)
    return KruskalResult(h, k - 1, 1.0 - chi2_cdf(h, k - 1))
