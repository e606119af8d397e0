"""Engagement of pedagogically desired versus undesired feedback, per dimension."""
from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from tutoreval.metrics import EngagementScores
from tutoreval.rubric import DIMENSIONS, DesiredLabelRubric
from tutoreval.stats import StatResult, holm_adjust, mann_whitney_u

METRICS = ("rel", "succ")
MIN_UNDESIRED_N = 15


@dataclass(frozen=True)
class DesirednessSplit:
    tutor_id: str
    dimension: str
    metric: str
    desired: tuple[float, ...]
    undesired: tuple[float, ...]
    desired_ids: tuple[str, ...] = ()
    undesired_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class Exclusion:
    tutor_id: str
    dimension: str
    metric: str
    reason: str

    def to_dict(self) -> dict:
        return {"tutor": self.tutor_id, "dimension": self.dimension, "metric": self.metric, "reason": self.reason}


def _score(s: EngagementScores, metric: str) -> float | None:
    if metric == "rel":
        return float(s.rel_score)
    if metric == "succ":
        v = s.succ_score
        return None if v is None else float(v)
    raise ValueError(f"metric must be one of {METRICS}")


def split_by_desiredness(
    pedagogy: Mapping[str, object],
    engagement: Mapping[str, EngagementScores],
    rubric: DesiredLabelRubric | None,
    metric: str,
    tutor_of: Callable[[str], str],
) -> list[DesirednessSplit]:
    rubric = rubric or DesiredLabelRubric.default()
    buckets: dict[tuple[str, str], tuple[list, list]] = {}
    for fid in sorted(set(pedagogy) & set(engagement)):
        value = _score(engagement[fid], metric)
        if value is None:
            continue
        tutor = tutor_of(fid)
        labels = pedagogy[fid].labels
        for dim in DIMENSIONS:
            yes, no = buckets.setdefault((tutor, dim), ([], []))
            (yes if rubric.is_desired(dim, labels[dim]) else no).append((fid, value))
    out = []
    for (tutor, dim) in sorted(buckets, key=lambda k: (k[0], DIMENSIONS.index(k[1]))):
        yes, no = buckets[(tutor, dim)]
        out.append(
            DesirednessSplit(
                tutor, dim, metric,
                tuple(v for _, v in yes), tuple(v for _, v in no),
                tuple(f for f, _ in yes), tuple(f for f, _ in no),
            )
        )
    return out


def compare_splits(
    splits: Sequence[DesirednessSplit], min_undesired_n: int = MIN_UNDESIRED_N
) -> tuple[list[StatResult], list[Exclusion]]:
    """Two-sided Mann-Whitney U per retained split, Holm-adjusted within each (tutor, metric).

    ``n_a`` / ``statistic`` refer to the desired group; the effect size is the
    rank-biserial correlation (positive when desired feedback scores higher).
    """
    retained: dict[tuple[str, str], list] = {}
    exclusions = []
    for s in splits:
        if len(s.undesired) < min_undesired_n:
            exclusions.append(Exclusion(s.tutor_id, s.dimension, s.metric, f"undesired n={len(s.undesired)} < {min_undesired_n}"))
            continue
        if not s.desired:
            exclusions.append(Exclusion(s.tutor_id, s.dimension, s.metric, "desired n=0"))
            continue
        retained.setdefault((s.tutor_id, s.metric), []).append((s, mann_whitney_u(s.desired, s.undesired)))
    results = []
    for (tutor, metric), items in retained.items():
        adjusted = holm_adjust([r.p_two_sided for _, r in items])
        for (s, r), p_holm in zip(items, adjusted):
            results.append(
                StatResult(
                    "mann_whitney_u", f"{tutor}/{s.dimension}/{metric}", r.U, r.rank_biserial,
                    r.p_two_sided, p_holm, f"desiredness/{tutor}/{metric}", r.n_a, r.n_b,
                )
            )
    return results, exclusions


def _quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    if len(values) == 1:
        return values[0], values[0], values[0]
    q1, q2, q3 = statistics.quantiles(values, n=4, method="inclusive")
    return q1, q2, q3


def summary_csv(splits: Sequence[DesirednessSplit]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tutor", "dimension", "metric", "group", "n", "mean", "q1", "median", "q3"])
    for s in splits:
        for group, vals in (("desired", s.desired), ("undesired", s.undesired)):
            if vals:
                q1, med, q3 = _quartiles(vals)
                w.writerow([s.tutor_id, s.dimension, s.metric, group, len(vals), repr(statistics.fmean(vals)), repr(q1), repr(med), repr(q3)])
            else:
                w.writerow([s.tutor_id, s.dimension, s.metric, group, 0, "", "", "", ""])
    return buf.getvalue()


def raw_scores_csv(splits: Sequence[DesirednessSplit]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tutor", "dimension", "metric", "group", "feedback_id", "score"])
    for s in splits:
        for group, ids, vals in (("desired", s.desired_ids, s.desired), ("undesired", s.undesired_ids, s.undesired)):
            for fid, v in zip(ids, vals):
                w.writerow([s.tutor_id, s.dimension, s.metric, group, fid, repr(v)])
    return buf.getvalue()
