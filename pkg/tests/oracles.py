"""Brute-force reference computations used only by the tests.

Nothing here imports from tutoreval; each function recomputes its quantity
from the definition by enumeration or exact arithmetic.
"""
from __future__ import annotations

import itertools
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np


def fisher_enumeration(a: int, b: int, c: int, d: int, rtol: Fraction = Fraction(1, 10**7)) -> float:
    """Two-sided Fisher p by listing every table with the observed margins."""
    r1, r2 = a + b, c + d
    c1 = a + c
    n = r1 + r2
    denom = math.comb(n, c1)

    def prob(x: int) -> Fraction:
        return Fraction(math.comb(r1, x) * math.comb(r2, c1 - x), denom)

    observed = prob(a)
    total = Fraction(0)
    for x in range(0, c1 + 1):
        if x > r1 or c1 - x > r2:
            continue
        px = prob(x)
        if px <= observed * (1 + rtol):
            total += px
    return float(min(total, Fraction(1)))


def u_statistic_pairs(a, b) -> Fraction:
    """U of ``a`` counted pair by pair: [x > y] + 1/2 [x == y]."""
    u = Fraction(0)
    for x in a:
        for y in b:
            if x > y:
                u += 1
            elif x == y:
                u += Fraction(1, 2)
    return u


def mwu_permutation_exact(a, b) -> float:
    """Exact two-sided permutation p over every relabelling of the pooled sample."""
    pooled = list(a) + list(b)
    n_a, n_b = len(a), len(b)
    center = Fraction(n_a * n_b, 2)
    observed = abs(u_statistic_pairs(a, b) - center)
    hits = 0
    total = 0
    for idx in itertools.combinations(range(len(pooled)), n_a):
        chosen = set(idx)
        xa = [pooled[i] for i in idx]
        xb = [pooled[i] for i in range(len(pooled)) if i not in chosen]
        total += 1
        if abs(u_statistic_pairs(xa, xb) - center) >= observed:
            hits += 1
    return hits / total


def mwu_monte_carlo(a, b, n_perm: int, seed: int) -> float:
    """Monte-Carlo permutation p for continuous (tie-free) samples."""
    rng = np.random.default_rng(seed)
    pooled = np.concatenate([np.asarray(a, float), np.asarray(b, float)])
    n_a, n_b = len(a), len(b)
    ranks = pooled.argsort().argsort() + 1.0
    center = n_a * n_b / 2.0
    observed = abs(ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0 - center)
    hits = 0
    done = 0
    chunk = 20_000
    while done < n_perm:
        m = min(chunk, n_perm - done)
        perms = rng.random((m, len(pooled))).argsort(axis=1)[:, :n_a]
        u = ranks[perms].sum(axis=1) - n_a * (n_a + 1) / 2.0
        hits += int(np.sum(np.abs(u - center) >= observed - 1e-9))
        done += m
    return hits / n_perm


def kappa_from_confusion(confusion) -> Fraction:
    n = sum(sum(row) for row in confusion)
    k = len(confusion)
    p_o = Fraction(sum(confusion[i][i] for i in range(k)), n)
    rows = [Fraction(sum(confusion[i]), n) for i in range(k)]
    cols = [Fraction(sum(confusion[i][j] for i in range(k)), n) for j in range(k)]
    p_e = sum(r * c for r, c in zip(rows, cols))
    return (p_o - p_e) / (1 - p_e)


def labels_from_confusion(confusion):
    a, b = [], []
    for i, row in enumerate(confusion):
        for j, count in enumerate(row):
            a += [i] * count
            b += [j] * count
    return a, b


def recount_metrics(out_dir: Path, desired=None) -> dict:
    """Recompute per-tutor DAMR / RelScore / SuccScore from raw files only.

    Reads the corpus JSONL files and the exported annotation JSONL files and
    counts everything with plain loops.
    """
    desired = desired or {
        "mistake_identification": {1},
        "mistake_location": {1},
        "revealing_answer": {3},
        "providing_guidance": {1},
        "actionability": {1},
        "coherence": {1},
        "tutor_tone": {1, 2},
        "humanness": {1},
    }
    out_dir = Path(out_dir)

    def rows(path):
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    subs = {r["submission_id"]: r for r in rows(out_dir / "submissions.jsonl")}
    fb = {r["feedback_id"]: r for r in rows(out_dir / "feedback.jsonl")}
    tutor_of = {fid: subs[r["submission_id"]]["tutor_id"] for fid, r in fb.items()}

    damr: dict = {}
    for ann in rows(out_dir / "annotations" / "pedagogy.jsonl"):
        t = tutor_of[ann["feedback_id"]]
        for dim, label in ann["labels"].items():
            cell = damr.setdefault((t, dim), [0, 0])
            cell[0] += int(label in desired[dim])
            cell[1] += 1

    rel: dict = {}
    succ: dict = {}
    succ_missing: dict = {}
    for ann in rows(out_dir / "annotations" / "engagement.jsonl"):
        t = tutor_of[ann["feedback_id"]]
        bits = ann["per_sentence"]
        n_rel = sum(s["rel"] for s in bits)
        rel.setdefault(t, []).append(Fraction(n_rel, len(bits)))
        if n_rel == 0:
            succ_missing[t] = succ_missing.get(t, 0) + 1
        else:
            n_succ = sum(s["succ"] for s in bits if s["rel"] == 1)
            succ.setdefault(t, []).append(Fraction(n_succ, n_rel))
    return {
        "damr": {k: Fraction(v[0], v[1]) for k, v in damr.items()},
        "damr_counts": {k: tuple(v) for k, v in damr.items()},
        "rel": rel,
        "succ": succ,
        "succ_missing": succ_missing,
    }
