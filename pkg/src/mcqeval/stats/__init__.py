"""Numerical core: distribution functions, tests, equivalence, and tracks."""

from .distributions import chi2_cdf, f_cdf, normal_cdf, t_cdf, t_ppf
from .equivalence import (
    EquivalenceConfig,
    PairwiseEquivalence,
    criterion_verdict,
    similarity_decision,
    tost_independent,
    tost_paired,
)
from .inference import (
    FriedmanResult,
    KruskalResult,
    WelchAnovaResult,
    WelchTResult,
    WilcoxonResult,
    cohens_dz,
    friedman,
    hedges_g,
    holm_adjust,
    kruskal_wallis,
    pooled_sd,
    welch_anova,
    welch_t,
    wilcoxon_signed_rank,
)
from .tracks import (
    CategoryAnalysis,
    CriterionAnalysis,
    SetScores,
    TrackResult,
    category_scores,
    matched_track,
    track_agreement,
    whole_track,
)

__all__ = [
    "CategoryAnalysis",
    "CriterionAnalysis",
    "EquivalenceConfig",
    "FriedmanResult",
    "KruskalResult",
    "PairwiseEquivalence",
    "SetScores",
    "TrackResult",
    "WelchAnovaResult",
    "WelchTResult",
    "WilcoxonResult",
    "category_scores",
    "chi2_cdf",
    "cohens_dz",
    "criterion_verdict",
    "f_cdf",
    "friedman",
    "hedges_g",
    "holm_adjust",
    "kruskal_wallis",
    "matched_track",
    "normal_cdf",
    "pooled_sd",
    "similarity_decision",
    "t_cdf",
    "t_ppf",
    "tost_independent",
    "tost_paired",
    "track_agreement",
    "welch_anova",
    "welch_t",
    "whole_track",
]
