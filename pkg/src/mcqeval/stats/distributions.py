"""Cumulative distribution functions used by the test machinery.

Thin wrappers over scipy.special's regularized incomplete beta/gamma, which
evaluate these CDFs to well below the 1e-10 absolute error this package
requires. Validation and tail conventions live here so callers never touch
the special functions directly.
"""

from __future__ import annotations

import math

from scipy import special as sp


def t_cdf(t: float, df: float) -> float:
    """Lower-tail CDF of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError(f"df must be > 0, got {df}")
    if math.isnan(t):
        raise ValueError("t is NaN")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    if t == 0.0:
        return 0.5
    # I_x(df/2, 1/2) with x = df / (df + t^2) is the two-sided tail mass.
    x = df / (df + t * t)
    tail = 0.5 * float(sp.betainc(df / 2.0, 0.5, x))
    return 1.0 - tail if t > 0 else tail


def chi2_cdf(x: float, df: float) -> float:
    """Lower-tail CDF of the chi-square distribution."""
    if df <= 0:
        raise ValueError(f"df must be > 0, got {df}")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    return float(sp.gammainc(df / 2.0, x / 2.0))


def f_cdf(x: float, df1: float, df2: float) -> float:
    """Lower-tail CDF of the F distribution."""
    if df1 <= 0 or df2 <= 0:
        raise ValueError(f"degrees of freedom must be > 0, got ({df1}, {df2})")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return float(sp.betainc(df1 / 2.0, df2 / 2.0, df1 * x / (df1 * x + df2)))


def normal_cdf(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def t_ppf(p: float, df: float) -> float:
    """Quantile of Student's t (inverse of :func:`t_cdf`)."""
    if df <= 0:
        raise ValueError(f"df must be > 0, got {df}")
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must be in (0, 1), got {p}")
    return float(sp.stdtrit(df, p))
