"""The evaluate step: metrics, tests, distributions and regression into one summary."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from tutoreval import __version__
from tutoreval.corpus import Corpus, engagement_pairs
from tutoreval.distributions import METRICS, compare_splits, raw_scores_csv, split_by_desiredness, summary_csv
from tutoreval.metrics import (
    EngagementScores,
    MetricsError,
    aggregate,
    aggregates_csv,
    damr_by_group,
    damr_delta,
    engagement_scores,
)
from tutoreval.perception import MODELS, PerceptionError, build_rows, fit_model
from tutoreval.rubric import DIMENSIONS, DesiredLabelRubric
from tutoreval.stats import (
    ContingencyTable2x2,
    RankDeficiencyError,
    SeparationError,
    cohens_h,
    fisher_exact_two_sided,
    holm_adjust,
    mann_whitney_u,
)

logger = logging.getLogger(__name__)


@dataclass
class EvaluateSettings:
    baseline_tutor: str = "baseline"
    rubric: DesiredLabelRubric = field(default_factory=DesiredLabelRubric.default)
    min_undesired_n: int = 15
    likert_cutoff: int = 4


@dataclass
class EvaluateResult:
    summary: dict
    model_errors: list[str]


def file_digest(path: str | Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _tutor_pair(corpus: Corpus, baseline: str) -> list[str] | None:
    tutors = corpus.tutor_ids
    if len(tutors) != 2 or baseline not in tutors:
        return None
    return [baseline] + [t for t in tutors if t != baseline]


def damr_payload(corpus, pedagogy, rubric, pair) -> dict:
    tutor_of = _tutor_lookup(corpus)
    table = damr_by_group(pedagogy, tutor_of, rubric)
    a, b = pair
    rows, pvals = [], []
    for dim in DIMENSIONS:
        ra, rb = table[(a, dim)], table[(b, dim)]
        p = fisher_exact_two_sided(ContingencyTable2x2.from_counts(ra.matched, ra.total, rb.matched, rb.total))
        pvals.append(p)
        rows.append(
            {
                "dimension": dim,
                "rate_a": ra.rate,
                "rate_b": rb.rate,
                "matched_a": ra.matched,
                "total_a": ra.total,
                "matched_b": rb.matched,
                "total_b": rb.total,
                "cohens_h": cohens_h(ra.rate, rb.rate),
                "p_raw": p,
            }
        )
    for r, ph in zip(rows, holm_adjust(pvals)):
        r["p_holm"] = ph
    return {"tutors": list(pair), "rows": rows, "family_id": "damr"}


def _tutor_lookup(corpus):
    subs = corpus.submission_index
    return lambda fid: subs[corpus.feedback[fid].submission_id].tutor_id


def _assignment_lookup(corpus):
    subs = corpus.submission_index
    return lambda fid: subs[corpus.feedback[fid].submission_id].assignment_id


def _score_value(s: EngagementScores, metric: str):
    return s.rel_score if metric == "rel" else s.succ_score


def engagement_payload(corpus, scores: Mapping[str, EngagementScores], pair) -> dict:
    tutor_of, asg_of = _tutor_lookup(corpus), _assignment_lookup(corpus)
    a, b = pair
    assignments = sorted({asg_of(fid) for fid in scores})
    rows = []
    for metric in METRICS:
        family = []
        for asg in assignments:
            vals = {t: [_score_value(s, metric) for fid, s in sorted(scores.items()) if tutor_of(fid) == t and asg_of(fid) == asg] for t in pair}
            aggs = {t: aggregate([(t, asg, v) for v in vals[t]], metric)[0] if vals[t] else None for t in pair}
            present = {t: [float(v) for v in vals[t] if v is not None] for t in pair}
            row = {"assignment": asg, "metric": metric}
            for side, t in (("a", a), ("b", b)):
                g = aggs[t]
                row.update({f"mean_{side}": g.mean if g else None, f"sd_{side}": g.sd if g else None,
                            f"n_{side}": g.n if g else 0, f"n_excluded_{side}": g.n_excluded if g else 0})
            if present[a] and present[b]:
                res = mann_whitney_u(present[a], present[b])
                row.update({"U": res.U, "p_raw": res.p_two_sided, "method": res.method})
                family.append(row)
            else:
                row.update({"U": None, "p_raw": None, "p_holm": None, "method": None})
            rows.append(row)
        for r, ph in zip(family, holm_adjust([r["p_raw"] for r in family])):
            r["p_holm"] = ph
    return {"tutors": list(pair), "rows": rows}


def delta_payload(corpus, pedagogy, rubric, pair, warnings: list[str]) -> dict | None:
    tutor_of, asg_of = _tutor_lookup(corpus), _assignment_lookup(corpus)
    table = damr_by_group(pedagogy, lambda fid: (tutor_of(fid), asg_of(fid)), rubric)
    a, b = pair
    ta = {(g[1], d): r for (g, d), r in table.items() if g[0] == a}
    tb = {(g[1], d): r for (g, d), r in table.items() if g[0] == b}
    try:
        delta = damr_delta(ta, tb)
    except MetricsError as exc:
        warnings.append(f"delta chart skipped: {exc}")
        return None
    omitted = []
    for dim in DIMENSIONS:
        desired = {rubric.is_desired(dim, ann.labels[dim]) for ann in pedagogy.values()}
        if len(desired) < 2:
            omitted.append(dim)
            warnings.append(f"delta chart: {dim} omitted (no variance in desiredness across all feedback)")
    assignments = sorted({k[0] for k in delta})
    return {
        "tutors": list(pair),
        "assignments": assignments,
        "dimensions": list(DIMENSIONS),
        "omitted": omitted,
        "cells": [{"assignment": asg, "dimension": d, "delta": delta[(asg, d)]} for asg in assignments for d in DIMENSIONS],
    }


def distributions_payload(corpus, pedagogy, scores, rubric, min_undesired_n, warnings: list[str]) -> dict:
    tutor_of = _tutor_lookup(corpus)
    splits, results, exclusions = [], [], []
    for metric in METRICS:
        s = split_by_desiredness(pedagogy, scores, rubric, metric, tutor_of)
        r, e = compare_splits(s, min_undesired_n)
        splits.extend(s)
        results.extend(r)
        exclusions.extend(e)
    for e in exclusions:
        warnings.append(f"distributions: {e.tutor_id}/{e.dimension}/{e.metric} excluded ({e.reason})")
    return {
        "results": [r.to_dict() for r in results],
        "exclusions": [e.to_dict() for e in exclusions],
        "summary_csv": summary_csv(splits),
        "raw_csv": raw_scores_csv(splits),
    }


def regression_payload(corpus, pedagogy, scores, settings, warnings: list[str], errors: list[str]) -> dict:
    if not corpus.ratings:
        warnings.append("regression skipped: no ratings")
        return {"skipped": "no ratings"}
    rows, report = build_rows(corpus, pedagogy, scores, settings.baseline_tutor, settings.rubric, settings.likert_cutoff)
    if not rows:
        warnings.append("regression skipped: no rated feedback")
        return {"skipped": "no rated feedback"}
    models = {}
    for name in MODELS:
        try:
            res = fit_model(rows, name)
            models[name] = res.to_dict()
            warnings.extend(res.warnings)
        except (SeparationError, RankDeficiencyError, PerceptionError, ValueError) as exc:
            msg = f"{name}: {type(exc).__name__}: {exc}"
            errors.append(msg)
            warnings.append(f"regression model failed: {msg}")
            models[name] = {"model": name, "fit": None, "n": 0, "covariates": [], "dropped": [], "warnings": [], "error": str(exc)}
    return {"models": models, "rows": report.to_dict()}


def evaluate(
    corpus: Corpus,
    pedagogy: Mapping,
    engagement: Mapping,
    settings: EvaluateSettings | None = None,
    *,
    inputs: Mapping[str, str | Path] | None = None,
    config_snapshot: Mapping | None = None,
    extra_warnings: list[str] | None = None,
) -> EvaluateResult:
    settings = settings or EvaluateSettings()
    warnings = list(corpus.report.warnings) + list(extra_warnings or [])
    errors: list[str] = []
    rubric = settings.rubric

    pedagogy = {fid: a for fid, a in pedagogy.items() if fid in corpus.feedback}
    pairs = {p.feedback.feedback_id for p in engagement_pairs(corpus)}
    scores = {fid: engagement_scores(a) for fid, a in sorted(engagement.items()) if fid in pairs}
    missing_ped = len(corpus.feedback) - len(pedagogy)
    if missing_ped:
        warnings.append(f"{missing_ped} feedback messages lack a pedagogy annotation and are left out")
    if len(pairs) - len(scores):
        warnings.append(f"{len(pairs) - len(scores)} engagement pairs lack an engagement annotation and are left out")
    abandoned = sum(1 for s in corpus.streams if s.abandoned and corpus.feedback_by_submission.get(s.submissions[-1].submission_id))
    if abandoned:
        warnings.append(f"{abandoned} feedback messages on abandoned streams have no revision and are excluded from engagement metrics")
    n_no_succ = sum(1 for s in scores.values() if s.succ_score is None)
    if n_no_succ:
        warnings.append(f"{n_no_succ} engagement annotations have no relevant sentence; SuccScore is absent for them")

    tutor_of, asg_of = _tutor_lookup(corpus), _assignment_lookup(corpus)
    per_tutor = {
        t: {dim: r.to_dict() for (g, dim), r in damr_by_group(pedagogy, tutor_of, rubric).items() if g == t}
        for t in corpus.tutor_ids
    } if pedagogy else {}
    metric_items = []
    for metric in METRICS:
        by_tutor = [(tutor_of(fid), "all", _score_value(s, metric)) for fid, s in scores.items()]
        by_asg = [(tutor_of(fid), f"assignment {asg_of(fid)}", _score_value(s, metric)) for fid, s in scores.items()]
        if by_tutor:
            metric_items.extend(aggregate(by_tutor, metric))
            metric_items.extend(aggregate(by_asg, metric))
    for dim in DIMENSIONS:
        items = [(tutor_of(fid), "all", int(rubric.is_desired(dim, a.labels[dim]))) for fid, a in sorted(pedagogy.items())]
        if items:
            metric_items.extend(aggregate(items, f"damr:{dim}"))

    tables: dict = {"metrics_csv": aggregates_csv(metric_items)}
    pair = _tutor_pair(corpus, settings.baseline_tutor)
    if pair is None:
        warnings.append(f"tutor comparison skipped: need exactly two tutors including {settings.baseline_tutor!r}, found {corpus.tutor_ids}")
    else:
        if pedagogy and all(any(tutor_of(f) == t for f in pedagogy) for t in pair):
            tables["damr"] = damr_payload(corpus, pedagogy, rubric, pair)
            tables["delta"] = delta_payload(corpus, pedagogy, rubric, pair, warnings)
        else:
            warnings.append("DAMR comparison skipped: a tutor has no pedagogy annotations")
        if scores:
            tables["engagement"] = engagement_payload(corpus, scores, pair)
    if pedagogy and scores:
        tables["distributions"] = distributions_payload(corpus, pedagogy, scores, rubric, settings.min_undesired_n, warnings)
    if settings.baseline_tutor in corpus.tutor_ids:
        tables["regression"] = regression_payload(corpus, pedagogy, scores, settings, warnings, errors)
    else:
        warnings.append(f"regression skipped: baseline tutor {settings.baseline_tutor!r} not in corpus")
        tables["regression"] = {"skipped": "baseline tutor not in corpus"}

    summary = {
        "tool_version": __version__,
        "corpus": {
            "digests": {k: file_digest(v) for k, v in sorted((inputs or {}).items()) if v is not None},
            "report": corpus.report.to_dict(),
            "streams": len(corpus.streams),
            "engagement_pairs": len(pairs),
        },
        "config": dict(config_snapshot or {}),
        "metrics": {
            "damr": per_tutor,
            "aggregates": [a.to_dict() for a in metric_items],
        },
        "exclusions": {
            "abandoned_feedback": abandoned,
            "succ_absent": n_no_succ,
            "missing_pedagogy": missing_ped,
        },
        "tables": tables,
        "model_errors": errors,
        "warnings": list(dict.fromkeys(warnings)),
    }
    return EvaluateResult(summary, errors)
