"""Pedagogy match rates and engagement scores, plus grouped aggregation.

Means and variances are accumulated with exact rational arithmetic and only
converted to floats at the end, so a naive recount reproduces them bit for bit.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from tutoreval.rubric import DIMENSIONS, DesiredLabelRubric

__all__ = [
    "DesiredLabelRubric",
    "DamrResult",
    "EngagementScores",
    "GroupAggregate",
    "MetricsError",
    "damr",
    "damr_by_group",
    "rel_score",
    "succ_score",
    "engagement_scores",
    "aggregate",
    "damr_delta",
    "aggregates_csv",
]


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class DamrResult:
    rate: float
    matched: int
    total: int

    def to_dict(self) -> dict:
        return {"rate": self.rate, "matched": self.matched, "total": self.total}


def damr(annotations, dimension: str, rubric: DesiredLabelRubric | None = None) -> DamrResult:
    rubric = rubric or DesiredLabelRubric.default()
    if dimension not in DIMENSIONS:
        raise MetricsError(f"unknown dimension {dimension!r}")
    total = matched = 0
    for ann in annotations:
        total += 1
        matched += rubric.is_desired(dimension, ann.labels[dimension])
    if total == 0:
        raise MetricsError("no annotations")
    return DamrResult(matched / total, matched, total)


def damr_by_group(
    annotations: Mapping[str, object],
    group_of: Callable[[str], Hashable],
    rubric: DesiredLabelRubric | None = None,
) -> dict[tuple, DamrResult]:
    """DAMR for every (group, dimension); ``group_of`` maps a feedback id to its group key."""
    buckets: dict[Hashable, list] = {}
    for fid in sorted(annotations):
        buckets.setdefault(group_of(fid), []).append(annotations[fid])
    return {(g, dim): damr(anns, dim, rubric) for g, anns in buckets.items() for dim in DIMENSIONS}


# -- engagement ------------------------------------------------------------------

@dataclass(frozen=True)
class EngagementScores:
    feedback_id: str
    n_sentences: int
    n_rel: int
    n_succ: int

    @property
    def rel_score(self) -> Fraction:
        return Fraction(self.n_rel, self.n_sentences)

    @property
    def succ_score(self) -> Fraction | None:
        return Fraction(self.n_succ, self.n_rel) if self.n_rel else None

    def to_dict(self) -> dict:
        s = self.succ_score
        return {
            "feedback_id": self.feedback_id,
            "rel_score": float(self.rel_score),
            "succ_score": None if s is None else float(s),
            "n_sentences": self.n_sentences,
            "n_rel": self.n_rel,
            "n_succ": self.n_succ,
        }


def engagement_scores(annotation) -> EngagementScores:
    bits = annotation.per_sentence
    if not bits:
        raise MetricsError(f"feedback {annotation.feedback_id!r} has no sentences")
    n_rel = sum(s.rel for s in bits)
    n_succ = sum(s.succ for s in bits if s.rel == 1)
    return EngagementScores(annotation.feedback_id, len(bits), n_rel, n_succ)


def rel_score(annotation) -> float:
    return float(engagement_scores(annotation).rel_score)


def succ_score(annotation) -> float | None:
    s = engagement_scores(annotation).succ_score
    return None if s is None else float(s)


# -- aggregation -----------------------------------------------------------------

@dataclass(frozen=True)
class GroupAggregate:
    tutor: str
    group: Hashable
    metric: str
    mean: float
    sd: float
    n: int
    n_excluded: int = 0

    def to_dict(self) -> dict:
        return {
            "tutor": self.tutor,
            "group": self.group,
            "metric": self.metric,
            "mean": self.mean,
            "sd": self.sd,
            "n": self.n,
            "n_excluded": self.n_excluded,
        }


def _mean_sd(values: Sequence[Fraction]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values, Fraction(0)) / n
    if n < 2:
        return float(mean), math.nan
    ss = sum(((v - mean) ** 2 for v in values), Fraction(0))
    return float(mean), math.sqrt(ss / (n - 1))


def aggregate(items: Iterable[tuple[str, Hashable, object]], metric: str) -> list[GroupAggregate]:
    """Aggregate (tutor, group, value) triples; ``None`` values are excluded and counted.

    The standard deviation is the sample (n - 1) one; it is NaN for a single value.
    Groups whose values are all missing are reported with n = 0 and NaN statistics.
    """
    buckets: dict[tuple, list] = {}
    excluded: dict[tuple, int] = {}
    for tutor, group, value in items:
        key = (tutor, group)
        buckets.setdefault(key, [])
        excluded.setdefault(key, 0)
        if value is None:
            excluded[key] += 1
        else:
            buckets[key].append(Fraction(value))
    if not buckets:
        raise MetricsError(f"nothing to aggregate for {metric}")
    out = []
    for key in sorted(buckets, key=lambda k: (str(k[0]), str(k[1]))):
        vals = buckets[key]
        mean, sd = _mean_sd(vals) if vals else (math.nan, math.nan)
        out.append(GroupAggregate(key[0], key[1], metric, mean, sd, len(vals), excluded[key]))
    return out


def damr_delta(table_a: Mapping[tuple, float], table_b: Mapping[tuple, float]) -> dict[tuple, float]:
    """Per-cell DAMR_B - DAMR_A in percentage points over identical cell sets."""
    only_a = sorted(set(table_a) - set(table_b), key=str)
    only_b = sorted(set(table_b) - set(table_a), key=str)
    if only_a or only_b:
        raise MetricsError(f"tutors cover different cells: missing for B {only_a}, missing for A {only_b}")
    return {k: 100.0 * (_rate(table_b[k]) - _rate(table_a[k])) for k in sorted(table_a, key=str)}


def _rate(v) -> float:
    return v.rate if isinstance(v, DamrResult) else float(v)


def aggregates_csv(aggregates: Iterable[GroupAggregate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tutor", "group", "metric", "mean", "sd", "n", "n_excluded"])
    for a in aggregates:
        w.writerow([a.tutor, a.group, a.metric, repr(a.mean), repr(a.sd), a.n, a.n_excluded])
    return buf.getvalue()
