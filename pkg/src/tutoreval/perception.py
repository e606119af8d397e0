"""Perceived-helpfulness datasets and the three logistic models fitted on them."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from tutoreval.metrics import EngagementScores
from tutoreval.rubric import DIMENSIONS, DesiredLabelRubric
from tutoreval.stats import RegressionFit, logit_fit

logger = logging.getLogger(__name__)

BASELINE = "baseline_tutor"
INTERCEPT = "const"
ENGAGEMENT = ("rel_score", "succ_score")

# covariates per model in table row order; the cohort control is in every model
MODELS: dict[str, tuple[str, ...]] = {
    "pedagogy_only": DIMENSIONS + (BASELINE,),
    "engagement_only": ENGAGEMENT + (BASELINE,),
    "combined": DIMENSIONS + ENGAGEMENT + (BASELINE,),
}
ROW_ORDER = DIMENSIONS + ENGAGEMENT + (BASELINE,)


class PerceptionError(ValueError):
    pass


def binarize_rating(likert: int, cutoff: int = 4) -> int:
    if isinstance(likert, bool) or not isinstance(likert, int) or not 1 <= likert <= 5:
        raise PerceptionError(f"likert rating must be an integer in 1..5, got {likert!r}")
    return int(likert >= cutoff)


@dataclass(frozen=True)
class HelpfulnessRow:
    feedback_id: str
    y: int
    P: tuple[int, ...] | None  # one indicator per dimension, None without a pedagogy annotation
    rel_score: float | None
    succ_score: float | None
    baseline_indicator: int

    def value(self, covariate: str):
        if covariate == BASELINE:
            return self.baseline_indicator
        if covariate == "rel_score":
            return self.rel_score
        if covariate == "succ_score":
            return self.succ_score
        return None if self.P is None else self.P[DIMENSIONS.index(covariate)]


@dataclass
class RowReport:
    rated_feedback: int = 0
    missing_pedagogy: list[str] = field(default_factory=list)
    missing_engagement: list[str] = field(default_factory=list)
    missing_succ: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rated_feedback": self.rated_feedback,
            "missing_pedagogy": len(self.missing_pedagogy),
            "missing_engagement": len(self.missing_engagement),
            "missing_succ": len(self.missing_succ),
        }


def build_rows(
    corpus,
    pedagogy: Mapping[str, object],
    engagement: Mapping[str, EngagementScores],
    baseline_tutor_id: str,
    rubric: DesiredLabelRubric | None = None,
    likert_cutoff: int = 4,
    ratings: Mapping[str, object] | None = None,
) -> tuple[list[HelpfulnessRow], RowReport]:
    """One row per rated feedback message, with missing pieces left as None.

    Each model later keeps only the rows carrying its covariates, so a row
    without a SuccScore still counts for the pedagogy-only model.
    """
    rubric = rubric or DesiredLabelRubric.default()
    if baseline_tutor_id not in corpus.tutor_ids:
        raise PerceptionError(f"baseline tutor {baseline_tutor_id!r} not in corpus (tutors: {corpus.tutor_ids})")
    ratings = corpus.ratings if ratings is None else ratings
    subs = corpus.submission_index
    report = RowReport()
    rows = []
    for fid in sorted(corpus.feedback):
        fb = corpus.feedback[fid]
        rating = ratings.get(fb.submission_id)
        if rating is None:
            continue
        report.rated_feedback += 1
        ann = pedagogy.get(fid)
        if ann is None:
            report.missing_pedagogy.append(fid)
            P = None
        else:
            P = tuple(int(rubric.is_desired(d, ann.labels[d])) for d in DIMENSIONS)
        scores = engagement.get(fid)
        rel = succ = None
        if scores is None:
            report.missing_engagement.append(fid)
        else:
            rel = float(scores.rel_score)
            s = scores.succ_score
            if s is None:
                report.missing_succ.append(fid)
            else:
                succ = float(s)
        baseline = int(subs[fb.submission_id].tutor_id == baseline_tutor_id)
        rows.append(HelpfulnessRow(fid, binarize_rating(rating.likert, likert_cutoff), P, rel, succ, baseline))
    return rows, report


@dataclass
class ModelResult:
    model: str
    fit: RegressionFit | None
    n: int
    covariates: tuple[str, ...]
    dropped: tuple[str, ...] = ()
    warnings: list[str] = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n": self.n,
            "covariates": list(self.covariates),
            "dropped": list(self.dropped),
            "warnings": list(self.warnings),
            "error": self.error,
            "fit": None if self.fit is None else self.fit.to_dict(),
        }


def design(rows: Sequence[HelpfulnessRow], covariates: Sequence[str]) -> tuple[np.ndarray, np.ndarray, list[str], list[str]]:
    """Design matrix for the rows that carry every covariate, minus constant columns."""
    usable = [r for r in rows if all(r.value(c) is not None for c in covariates)]
    if not usable:
        raise PerceptionError("no rows carry the covariates " + ", ".join(covariates))
    cols = np.array([[r.value(c) for c in covariates] for r in usable], dtype=float).reshape(len(usable), len(covariates))
    keep = [j for j in range(len(covariates)) if np.ptp(cols[:, j]) > 0]
    dropped = [covariates[j] for j in range(len(covariates)) if j not in keep]
    X = np.column_stack([np.ones(len(usable)), cols[:, keep]])
    y = np.array([r.y for r in usable], dtype=float)
    return X, y, [INTERCEPT] + [covariates[j] for j in keep], dropped


def fit_model(rows: Sequence[HelpfulnessRow], model: str) -> ModelResult:
    if model not in MODELS:
        raise PerceptionError(f"unknown model {model!r}")
    if not rows:
        raise PerceptionError("no rows to fit")
    X, y, names, dropped = design(rows, MODELS[model])
    warnings = []
    for c in dropped:
        msg = f"{model}: covariate {c} dropped (no variance)"
        logger.warning(msg)
        warnings.append(msg)
    fit = logit_fit(X, y, names)
    warnings.extend(f"{model}: {w}" for w in fit.warnings)
    return ModelResult(model, fit, len(y), tuple(names[1:]), tuple(dropped), warnings)


def run_models(rows: Sequence[HelpfulnessRow]) -> dict[str, ModelResult]:
    """Fit the pedagogy-only, engagement-only and combined models; fit errors propagate."""
    if not rows:
        raise PerceptionError("no rows to fit")
    return {m: fit_model(rows, m) for m in MODELS}
