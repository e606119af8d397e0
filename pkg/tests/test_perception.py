import numpy as np
import pytest

from conftest import write_jsonl
from tutoreval.corpus import parse_corpus
from tutoreval.judge.annotate import PedagogyAnnotation
from tutoreval.metrics import EngagementScores
from tutoreval.perception import (
    BASELINE,
    HelpfulnessRow,
    PerceptionError,
    binarize_rating,
    build_rows,
    design,
    fit_model,
    run_models,
)
from tutoreval.rubric import DIMENSIONS

ALL_DESIRED = {d: 1 for d in DIMENSIONS} | {"revealing_answer": 3}


def test_binarize_rating():
    assert [binarize_rating(v) for v in (1, 2, 3, 4, 5)] == [0, 0, 0, 1, 1]
    assert binarize_rating(3, cutoff=3) == 1
    for bad in (0, 6, True, 4.0):
        with pytest.raises(PerceptionError):
            binarize_rating(bad)


def _rated_corpus(tmp_path, n=10):
    subs, fbs, ratings = [], [], []
    for i in range(n):
        tutor = "baseline" if i % 2 else "misconception"
        for t in range(2):
            subs.append({
                "submission_id": f"s{i}_{t}", "tutor_id": tutor, "student_id": f"u{i}", "assignment_id": 1,
                "problem_id": "p", "attempt_index": t, "timestamp": f"2024-01-01T00:0{t}:00Z",
                "code": f"x = {t}", "autograder_output": "", "passed": t == 1,
            })
        fbs.append({"feedback_id": f"f{i}", "submission_id": f"s{i}_0", "text": "Try again. Check the loop."})
        ratings.append({"submission_id": f"s{i}_0", "likert": 1 + i % 5})
    return parse_corpus(
        write_jsonl(tmp_path / "s.jsonl", subs), write_jsonl(tmp_path / "f.jsonl", fbs), write_jsonl(tmp_path / "r.jsonl", ratings)
    )


def test_build_rows_direct_assembly(tmp_path):
    corpus = _rated_corpus(tmp_path, 2)
    ped = {f"f{i}": PedagogyAnnotation(f"f{i}", ALL_DESIRED) for i in range(2)}
    eng = {f"f{i}": EngagementScores(f"f{i}", 2, 2, 2) for i in range(2)}
    rows, report = build_rows(corpus, ped, eng, "baseline")
    row = next(r for r in rows if r.feedback_id == "f1")
    assert (row.y, *row.P, row.rel_score, row.succ_score, row.baseline_indicator) == (0, 1, 1, 1, 1, 1, 1, 1, 1, 1.0, 1.0, 1)
    assert report.rated_feedback == 2


def test_missing_succ_only_leaves_engagement_models(tmp_path):
    corpus = _rated_corpus(tmp_path, 10)
    ped = {f"f{i}": PedagogyAnnotation(f"f{i}", {**ALL_DESIRED, "coherence": 1 + i % 2}) for i in range(10)}
    eng = {f"f{i}": EngagementScores(f"f{i}", 2, 0 if i in (3, 6) else 1 + i % 2, 1) for i in range(10)}
    rows, report = build_rows(corpus, ped, eng, "baseline")
    assert len(report.missing_succ) == 2
    X, _, _, _ = design(rows, ("coherence", BASELINE))
    assert X.shape[0] == 10
    X, _, _, _ = design(rows, ("rel_score", "succ_score", BASELINE))
    assert X.shape[0] == 8


def test_unknown_baseline_rejected(tmp_path):
    with pytest.raises(PerceptionError, match="fall2023"):
        build_rows(_rated_corpus(tmp_path, 2), {}, {}, "fall2023")


def test_build_rows_is_order_invariant(tmp_path):
    corpus = _rated_corpus(tmp_path, 6)
    ped = {f"f{i}": PedagogyAnnotation(f"f{i}", ALL_DESIRED) for i in range(6)}
    eng = {f"f{i}": EngagementScores(f"f{i}", 3, 1 + i % 3, i % 2) for i in range(6)}
    a, _ = build_rows(corpus, ped, eng, "baseline")
    b, _ = build_rows(corpus, dict(reversed(list(ped.items()))), dict(reversed(list(eng.items()))), "baseline")
    assert a == b


def _synthetic_rows(n, seed, beta_rel=1.5, constant_tone=True):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        P = tuple(int(v) for v in rng.random(8) < 0.85)
        if constant_tone:
            P = P[:6] + (1,) + P[7:]
        rel = float(rng.integers(0, 5)) / 4
        succ = float(rng.integers(0, 3)) / 2 if rel > 0 else None
        base = int(rng.random() < 0.5)
        z = -0.5 + 0.3 * P[3] + beta_rel * rel + 0.4 * (succ or 0.0) - 0.4 * base
        y = int(rng.random() < 1 / (1 + np.exp(-z)))
        rows.append(HelpfulnessRow(f"f{i}", y, P, rel, succ, base))
    return rows


def test_zero_variance_covariate_dropped_with_named_warning():
    rows = _synthetic_rows(800, 1)
    fits = run_models(rows)
    for name in ("pedagogy_only", "combined"):
        assert "tutor_tone" in fits[name].dropped
        assert any("tutor_tone" in w for w in fits[name].warnings)
        assert "tutor_tone" not in fits[name].fit.names
    assert fits["engagement_only"].dropped == ()
    for res in fits.values():
        assert BASELINE in res.fit.names
        assert np.all(np.isfinite(res.fit.coefficients))


def test_dropping_constant_column_keeps_fitted_probabilities():
    rows = _synthetic_rows(600, 2)
    res = fit_model(rows, "pedagogy_only")
    X, y, names, _ = design(rows, ("mistake_identification", "mistake_location", "revealing_answer", "providing_guidance",
                                   "actionability", "coherence", "humanness", BASELINE))
    from tutoreval.stats import logit_fit

    direct = logit_fit(X, y, names)
    assert np.allclose(res.fit.predict_proba(X), direct.predict_proba(X), atol=1e-10)


def test_positive_rel_effect_recovered():
    res = fit_model(_synthetic_rows(3000, 3), "engagement_only")
    assert res.fit.coef("rel_score") > 0 and res.fit.p("rel_score") < 0.05
    assert res.n == sum(1 for r in _synthetic_rows(3000, 3) if r.succ_score is not None)


def test_empty_rows_rejected():
    with pytest.raises(PerceptionError):
        run_models([])
