"""Statistical kernel: exact tests, effect sizes, agreement and logistic regression."""
from tutoreval.stats.effects import cohens_h, cohens_kappa, holm_adjust, percent_agreement
from tutoreval.stats.exact import (
    ContingencyTable2x2,
    MannWhitneyResult,
    fisher_exact_two_sided,
    mann_whitney_u,
)
from tutoreval.stats.logit import (
    RankDeficiencyError,
    RegressionFit,
    SeparationError,
    log_likelihood,
    logit_fit,
    mcfadden_r2,
    score_vector,
)
from tutoreval.stats.results import StatResult, stat_results_csv

__all__ = [
    "ContingencyTable2x2",
    "MannWhitneyResult",
    "RankDeficiencyError",
    "RegressionFit",
    "SeparationError",
    "StatResult",
    "cohens_h",
    "cohens_kappa",
    "fisher_exact_two_sided",
    "holm_adjust",
    "log_likelihood",
    "logit_fit",
    "mann_whitney_u",
    "mcfadden_r2",
    "percent_agreement",
    "score_vector",
    "stat_results_csv",
]
