from __future__ import annotations

import math
from collections import Counter
from typing import Hashable, Sequence


def cohens_h(p1: float, p2: float) -> float:
    """Arcsine effect size, positive when ``p2 > p1``."""
    for p in (p1, p2):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"proportion out of range: {p}")
    return 2.0 * math.asin(math.sqrt(p2)) - 2.0 * math.asin(math.sqrt(p1))


def holm_adjust(p_values: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, returned in input order."""
    m = len(p_values)
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value out of range: {p}")
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, (m - rank) * p_values[i])
        adjusted[i] = min(1.0, running)
    return adjusted


def cohens_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Cohen's kappa for two raters over the same items.

    When both raters use a single identical label (chance agreement is 1)
    the raters agree perfectly and 1.0 is returned.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError(f"label lists differ in length: {len(labels_a)} != {len(labels_b)}")
    n = len(labels_a)
    if n == 0:
        raise ValueError("no labels")
    # integer numerator and denominator so the only rounding is the final division
    agree = sum(x == y for x, y in zip(labels_a, labels_b))
    count_a = Counter(labels_a)
    count_b = Counter(labels_b)
    chance = sum(count_a[k] * count_b.get(k, 0) for k in count_a)
    if chance == n * n:
        return 1.0
    return (n * agree - chance) / (n * n - chance)


def percent_agreement(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    if len(labels_a) != len(labels_b):
        raise ValueError("label lists differ in length")
    if not labels_a:
        raise ValueError("no labels")
    return sum(x == y for x, y in zip(labels_a, labels_b)) / len(labels_a)
