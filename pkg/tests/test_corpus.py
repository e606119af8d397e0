import json
import random
import shutil

import pytest

from conftest import write_jsonl
from tutoreval.corpus import CorpusError, ValidationError, engagement_pairs, parse_corpus, prior_context, write_corpus


def _sub(sid, student, problem, attempt, passed, tutor="baseline", minute=None):
    return {
        "submission_id": sid,
        "tutor_id": tutor,
        "student_id": student,
        "assignment_id": 1,
        "problem_id": problem,
        "attempt_index": attempt,
        "timestamp": f"2024-09-02T10:{minute if minute is not None else attempt:02d}:00Z",
        "code": f"x = {attempt}",
        "autograder_output": "ok" if passed else "fail",
        "passed": passed,
    }


def test_two_students_two_attempts(tmp_path):
    subs = [_sub("a0", "s1", "p", 0, False), _sub("a1", "s1", "p", 1, True), _sub("b0", "s2", "p", 0, False), _sub("b1", "s2", "p", 1, True)]
    fb = [{"feedback_id": "fa", "submission_id": "a0", "text": "Fix it."}, {"feedback_id": "fb", "submission_id": "b0", "text": "Fix it."}]
    corpus = parse_corpus(write_jsonl(tmp_path / "s.jsonl", subs), write_jsonl(tmp_path / "f.jsonl", fb))
    assert len(corpus.streams) == 2
    assert len(engagement_pairs(corpus)) == 2


def test_unknown_feedback_reference_names_id(tmp_path):
    subs = [_sub("a0", "s1", "p", 0, False)]
    fb = [{"feedback_id": "f", "submission_id": "x9", "text": "Hi."}]
    with pytest.raises(ValidationError, match="x9") as exc:
        parse_corpus(write_jsonl(tmp_path / "s.jsonl", subs), write_jsonl(tmp_path / "f.jsonl", fb))
    assert exc.value.ids == ["x9"]


def test_feedback_on_passed_submission_rejected(tmp_path):
    subs = [_sub("a0", "s1", "p", 0, True)]
    fb = [{"feedback_id": "f", "submission_id": "a0", "text": "Hi."}]
    with pytest.raises(ValidationError, match="a0"):
        parse_corpus(write_jsonl(tmp_path / "s.jsonl", subs), write_jsonl(tmp_path / "f.jsonl", fb))


def test_fixture_linkage_counts(small_corpus):
    assert small_corpus.report.linkage == (12, 7, 3)
    assert len(small_corpus.streams) == 5
    assert len(engagement_pairs(small_corpus)) == 4


def test_pair_count_identity(small_corpus):
    fb_subs = {f.submission_id for f in small_corpus.feedback.values()}
    failed_with_fb = sum(1 for s in small_corpus.submissions() if not s.passed and s.submission_id in fb_subs)
    abandoned_with_fb = sum(1 for st in small_corpus.streams if st.submissions[-1].submission_id in fb_subs)
    assert len(engagement_pairs(small_corpus)) == failed_with_fb - abandoned_with_fb


def test_stream_examples(tmp_path):
    subs = [_sub("a0", "s1", "p", 0, False), _sub("a1", "s1", "p", 1, False), _sub("a2", "s1", "p", 2, True), _sub("g0", "s2", "p", 0, False)]
    fb = [
        {"feedback_id": "f0", "submission_id": "a0", "text": "One."},
        {"feedback_id": "f1", "submission_id": "a1", "text": "Two."},
        {"feedback_id": "fg", "submission_id": "g0", "text": "Gave up."},
    ]
    corpus = parse_corpus(write_jsonl(tmp_path / "s.jsonl", subs), write_jsonl(tmp_path / "f.jsonl", fb))
    pairs = engagement_pairs(corpus)
    assert [(p.prev.submission_id, p.next.submission_id) for p in pairs] == [("a0", "a1"), ("a1", "a2")]


def test_malformed_line_names_file_and_line(tmp_path):
    p = tmp_path / "s.jsonl"
    p.write_text(json.dumps(_sub("a0", "s1", "p", 0, False)) + "\n{not json\n")
    f = write_jsonl(tmp_path / "f.jsonl", [])
    with pytest.raises(CorpusError, match=r"s\.jsonl:2"):
        parse_corpus(p, f)


def test_missing_field_and_wrong_type(tmp_path):
    row = _sub("a0", "s1", "p", 0, False)
    del row["code"]
    with pytest.raises(CorpusError, match="code"):
        parse_corpus(write_jsonl(tmp_path / "s.jsonl", [row]), write_jsonl(tmp_path / "f.jsonl", []))
    row = _sub("a0", "s1", "p", 0, False)
    row["assignment_id"] = "1"
    with pytest.raises(CorpusError, match="assignment_id"):
        parse_corpus(write_jsonl(tmp_path / "s.jsonl", [row]), write_jsonl(tmp_path / "f.jsonl", []))


def test_duplicate_submission_id(tmp_path):
    subs = [_sub("a0", "s1", "p", 0, False), _sub("a0", "s2", "p", 0, False)]
    with pytest.raises(CorpusError, match="duplicate submission_id"):
        parse_corpus(write_jsonl(tmp_path / "s.jsonl", subs), write_jsonl(tmp_path / "f.jsonl", []))


def test_stream_invariants_enforced(tmp_path):
    gap = [_sub("a0", "s1", "p", 0, False), _sub("a2", "s1", "p", 2, True)]
    with pytest.raises(ValidationError, match="consecutive"):
        parse_corpus(write_jsonl(tmp_path / "s.jsonl", gap), write_jsonl(tmp_path / "f.jsonl", []))
    early_pass = [_sub("a0", "s1", "p", 0, True), _sub("a1", "s1", "p", 1, False)]
    with pytest.raises(ValidationError, match="passing"):
        parse_corpus(write_jsonl(tmp_path / "s.jsonl", early_pass), write_jsonl(tmp_path / "f.jsonl", []))
    backwards = [_sub("a0", "s1", "p", 0, False, minute=5), _sub("a1", "s1", "p", 1, True, minute=1)]
    with pytest.raises(ValidationError, match="timestamps"):
        parse_corpus(write_jsonl(tmp_path / "s.jsonl", backwards), write_jsonl(tmp_path / "f.jsonl", []))


def test_rating_rules(tmp_path):
    subs = [_sub("a0", "s1", "p", 0, False), _sub("a1", "s1", "p", 1, False)]
    fb = [{"feedback_id": "f0", "submission_id": "a0", "text": "Hint."}]
    ratings = [{"submission_id": "a0", "likert": 2}, {"submission_id": "a1", "likert": 5}, {"submission_id": "a0", "likert": 4}]
    corpus = parse_corpus(
        write_jsonl(tmp_path / "s.jsonl", subs), write_jsonl(tmp_path / "f.jsonl", fb), write_jsonl(tmp_path / "r.jsonl", ratings)
    )
    assert corpus.ratings["a0"].likert == 4
    assert "a1" not in corpus.ratings
    assert corpus.report.ratings_dropped == 2
    assert any("without feedback" in w for w in corpus.report.warnings)
    assert any("duplicate rating" in w for w in corpus.report.warnings)


def test_rating_out_of_range(tmp_path):
    subs = [_sub("a0", "s1", "p", 0, False)]
    fb = [{"feedback_id": "f0", "submission_id": "a0", "text": "Hint."}]
    with pytest.raises(CorpusError, match="likert"):
        parse_corpus(
            write_jsonl(tmp_path / "s.jsonl", subs), write_jsonl(tmp_path / "f.jsonl", fb), write_jsonl(tmp_path / "r.jsonl", [{"submission_id": "a0", "likert": 6}])
        )


def test_unknown_keys_warn(tmp_path):
    row = _sub("a0", "s1", "p", 0, False)
    row["ip_address"] = "hidden"
    corpus = parse_corpus(write_jsonl(tmp_path / "s.jsonl", [row]), write_jsonl(tmp_path / "f.jsonl", []))
    assert any("ip_address" in w for w in corpus.report.warnings)


def test_round_trip(small_corpus, tmp_path):
    paths = write_corpus(small_corpus, tmp_path)
    again = parse_corpus(paths["submissions"], paths["feedback"], paths["ratings"])
    assert again == small_corpus


def test_shuffled_input_yields_identical_streams(small_dir, small_corpus, tmp_path):
    rng = random.Random(0)
    for name in ("submissions", "feedback", "ratings"):
        lines = (small_dir / f"{name}.jsonl").read_text().splitlines(keepends=True)
        rng.shuffle(lines)
        (tmp_path / f"{name}.jsonl").write_text("".join(lines))
    shuffled = parse_corpus(tmp_path / "submissions.jsonl", tmp_path / "feedback.jsonl", tmp_path / "ratings.jsonl")
    assert shuffled.streams == small_corpus.streams
    assert shuffled == small_corpus


def test_prior_context(small_corpus):
    ctx = prior_context(small_corpus, "s03")
    assert [s.submission_id for s, _ in ctx] == ["s01", "s02"]
    assert [f.feedback_id for _, f in ctx] == ["f01", "f02"]


def test_feedback_is_segmented(small_corpus):
    f = small_corpus.feedback["f03"]
    assert f.M == 2
    assert f.sentences[1].startswith("Think about")
