from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields
from typing import Iterable


@dataclass(frozen=True)
class StatResult:
    """One hypothesis-test outcome as carried into reports."""

    test_name: str
    group: str
    statistic: float
    effect_size: float
    p_raw: float
    p_holm: float
    family_id: str
    n_a: int
    n_b: int

    def to_dict(self) -> dict:
        return asdict(self)


def stat_results_csv(results: Iterable[StatResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f.name for f in fields(StatResult)])
    for r in results:
        writer.writerow([getattr(r, f.name) for f in fields(StatResult)])
    return buf.getvalue()
