"""Fisher's exact test and the Mann-Whitney U test.

Both are implemented directly (no scipy) so the tie and sidedness
conventions are pinned in one place:

* Fisher two-sided p sums every table with the observed margins whose
  hypergeometric probability is at most the observed one, with a 1e-7
  relative tolerance for ties.
* Mann-Whitney U is the count of pairs with a > b plus half the ties. Small
  samples (n_a + n_b <= 20) get the exact permutation distribution, ties
  included; larger samples use the normal approximation with tie-corrected
  variance and a 0.5 continuity correction.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

FISHER_TIE_RTOL = 1e-7
MWU_EXACT_MAX_N = 20


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Rows are tutors, columns are matched / unmatched."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"cell {name} must be a non-negative integer, got {v!r}")
        if self.total < 1:
            raise ValueError("empty contingency table")

    @classmethod
    def from_counts(cls, matched_a: int, total_a: int, matched_b: int, total_b: int) -> "ContingencyTable2x2":
        return cls(matched_a, total_a - matched_a, matched_b, total_b - matched_b)

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d


def _as_table(t) -> ContingencyTable2x2:
    if isinstance(t, ContingencyTable2x2):
        return t
    (a, b), (c, d) = t
    return ContingencyTable2x2(int(a), int(b), int(c), int(d))


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def fisher_exact_two_sided(table) -> float:
    """Two-sided Fisher exact p-value for a 2x2 table.

    Accepts a ContingencyTable2x2 or a nested ``[[a, b], [c, d]]``.
    """
    t = _as_table(table)
    row1 = t.a + t.b
    col1 = t.a + t.c
    n = t.total
    lo = max(0, col1 - (n - row1))
    hi = min(row1, col1)
    if lo == hi:
        return 1.0

    # log P(X = x) up to the constant log C(n, col1)
    def logp(x: int) -> float:
        return _log_comb(row1, x) + _log_comb(n - row1, col1 - x)

    logs = [logp(x) for x in range(lo, hi + 1)]
    top = max(logs)
    weights = [math.exp(v - top) for v in logs]
    observed = weights[t.a - lo]
    cutoff = observed * (1.0 + FISHER_TIE_RTOL)
    tail = math.fsum(w for w in weights if w <= cutoff)
    p = tail / math.fsum(weights)
    return min(1.0, p)


@dataclass(frozen=True)
class MannWhitneyResult:
    U: float
    p_two_sided: float
    method: str  # "exact" or "normal"
    n_a: int
    n_b: int
    degenerate_variance: bool = False

    @property
    def U_b(self) -> float:
        return self.n_a * self.n_b - self.U

    @property
    def rank_biserial(self) -> float:
        """Effect size in [-1, 1]; positive when sample_a tends to be larger."""
        return 2.0 * self.U / (self.n_a * self.n_b) - 1.0


def _midranks_doubled(pooled: Sequence[float]) -> tuple[list[int], Counter]:
    """Return twice the midrank of every value (always an integer) and the tie counts."""
    counts = Counter(pooled)
    doubled_rank_of = {}
    start = 1
    for value in sorted(counts):
        c = counts[value]
        # midrank = start + (c - 1) / 2
        doubled_rank_of[value] = 2 * start + c - 1
        start += c
    return [doubled_rank_of[v] for v in pooled], counts


def _exact_counts(counts: Counter, n_a: int) -> dict[int, int]:
    """Number of ways to pick n_a of the pooled values for each doubled rank sum.

    Dynamic programme over tie groups: choosing j of a group of size c with
    doubled midrank r contributes comb(c, j) ways and j * r to the sum.
    Equivalent to enumerating all comb(n, n_a) assignments.
    """
    table: dict[tuple[int, int], int] = {(0, 0): 1}
    start = 1
    for value in sorted(counts):
        c = counts[value]
        r2 = 2 * start + c - 1
        start += c
        nxt: dict[tuple[int, int], int] = {}
        for (k, s), ways in table.items():
            for j in range(0, min(c, n_a - k) + 1):
                key = (k + j, s + j * r2)
                nxt[key] = nxt.get(key, 0) + ways * math.comb(c, j)
        table = nxt
    return {s: w for (k, s), w in table.items() if k == n_a}


def mann_whitney_u(sample_a: Sequence[float], sample_b: Sequence[float]) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test; U is reported for ``sample_a``."""
    a = [float(v) for v in sample_a]
    b = [float(v) for v in sample_b]
    n_a, n_b = len(a), len(b)
    if n_a == 0 or n_b == 0:
        raise ValueError("both samples must be non-empty")
    pooled = a + b
    n = n_a + n_b
    doubled, counts = _midranks_doubled(pooled)
    rank_sum2 = sum(doubled[:n_a])
    # 2U = 2R_a - n_a(n_a + 1); kept in doubled integer units for exact comparison
    u2 = rank_sum2 - n_a * (n_a + 1)
    U = u2 / 2.0
    center2 = n_a * n_b  # 2 * E[U]

    if len(counts) == 1:
        return MannWhitneyResult(U, 1.0, "exact" if n <= MWU_EXACT_MAX_N else "normal", n_a, n_b, True)

    if n <= MWU_EXACT_MAX_N:
        dist = _exact_counts(counts, n_a)
        total = math.comb(n, n_a)
        observed_dev = abs(u2 - center2)
        hits = sum(w for s, w in dist.items() if abs(s - n_a * (n_a + 1) - center2) >= observed_dev)
        return MannWhitneyResult(U, hits / total, "exact", n_a, n_b)

    tie_term = sum(c**3 - c for c in counts.values())
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return MannWhitneyResult(U, 1.0, "normal", n_a, n_b, True)
    z = (abs(U - n_a * n_b / 2.0) - 0.5) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return MannWhitneyResult(U, min(1.0, p), "normal", n_a, n_b)
