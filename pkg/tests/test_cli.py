import json

import pytest
import yaml

from conftest import write_jsonl
from tutoreval.cli import main
from tutoreval.corpus import parse_corpus
from tutoreval.judge import BackendUnavailableError, FixtureBackend, ReplyCache
from tutoreval.judge.runner import annotate_corpus, write_annotations


def _config(path, **sections):
    path.write_text(yaml.safe_dump(sections), encoding="utf-8")
    return path


@pytest.fixture
def synth_run(tmp_path):
    """A small synthetic corpus plus a config pointing at it."""
    cfg = _config(
        tmp_path / "cfg.yaml",
        inputs={"submissions": "data/submissions.jsonl", "feedback": "data/feedback.jsonl",
                "ratings": "data/ratings.jsonl", "problems": "data/problems.jsonl"},
        judge={"backend": "fixture", "transcript": "data/transcript.jsonl"},
        out_dir="run",
        seed=5,
        synth={"n_students": 30, "n_problems": 2, "assignments": 2},
    )
    assert main(["synth", "--config", str(cfg), "--out-dir", str(tmp_path / "data")]) == 0
    return tmp_path, cfg


def test_validate_fixture_counts(tmp_path, small_dir, capsys):
    cfg = _config(tmp_path / "c.yaml", inputs={k: str(small_dir / f"{k}.jsonl") for k in ("submissions", "feedback", "ratings")},
                  out_dir=str(tmp_path / "out"))
    assert main(["validate", "--config", str(cfg)]) == 0
    report = json.loads((tmp_path / "out" / "validate.json").read_text())
    assert (report["submissions_linked"], report["feedback_linked"], report["ratings_linked"]) == (12, 7, 3)
    assert report["streams"] == 5


def test_validate_broken_reference(tmp_path, small_dir, capsys):
    fb = (small_dir / "feedback.jsonl").read_text() + json.dumps({"feedback_id": "f99", "submission_id": "x9", "text": "Hi."}) + "\n"
    (tmp_path / "feedback.jsonl").write_text(fb)
    cfg = _config(tmp_path / "c.yaml", inputs={"submissions": str(small_dir / "submissions.jsonl"),
                                                "feedback": str(tmp_path / "feedback.jsonl")}, out_dir=str(tmp_path / "out"))
    assert main(["validate", "--config", str(cfg)]) == 2
    assert "x9" in capsys.readouterr().err


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = _config(tmp_path / "c.yaml", out_dir="o", thresholds={"min_undesired": 3})
    assert main(["validate", "--config", str(cfg)]) == 2
    assert "min_undesired" in capsys.readouterr().err


def test_inline_credentials_are_not_accepted(tmp_path):
    cfg = _config(tmp_path / "c.yaml", judge={"backend": "remote", "url": "https://x", "model": "m", "api_key": "sk-123"})
    assert main(["validate", "--config", str(cfg)]) == 2


def test_synth_twice_byte_identical_and_valid(tmp_path):
    cfg = _config(tmp_path / "c.yaml", out_dir="o")
    assert main(["synth", "--config", str(cfg), "--seed", "42", "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["synth", "--config", str(cfg), "--seed", "42", "--out-dir", str(tmp_path / "b")]) == 0
    for name in ("submissions.jsonl", "feedback.jsonl", "ratings.jsonl", "transcript.jsonl", "ground_truth.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    vcfg = _config(tmp_path / "v.yaml", inputs={"submissions": "a/submissions.jsonl", "feedback": "a/feedback.jsonl",
                                                 "ratings": "a/ratings.jsonl"}, out_dir="vout")
    assert main(["validate", "--config", str(vcfg)]) == 0


def test_synth_zero_students(tmp_path):
    cfg = _config(tmp_path / "c.yaml", out_dir="o", synth={"n_students": 0})
    assert main(["synth", "--config", str(cfg)]) == 2


def test_annotate_is_deterministic_and_cached(synth_run, capsys):
    tmp_path, cfg = synth_run
    assert main(["annotate", "--config", str(cfg), "--parallelism", "4"]) == 0
    ann = tmp_path / "run" / "annotations"
    first = {p.name: p.read_bytes() for p in ann.iterdir()}
    log = json.loads((tmp_path / "run" / "annotate.json").read_text())
    assert log["cache_misses"] > 0 and log["failures"] == []
    assert main(["annotate", "--config", str(cfg)]) == 0
    log = json.loads((tmp_path / "run" / "annotate.json").read_text())
    assert log["cache_misses"] == 0 and log["requests"] == 0 and log["cache_hits"] > 0
    assert {p.name: p.read_bytes() for p in ann.iterdir()} == first


class _Dying(FixtureBackend):
    """Fixture backend that fails for good after a fixed number of requests."""

    def __init__(self, base, limit):
        super().__init__(base.replies, base.label)
        self.limit = limit

    def complete(self, request):
        if self.requests >= self.limit:
            raise BackendUnavailableError("simulated outage")
        return super().complete(request)


def test_interrupted_annotation_resumes_to_identical_files(synth_run):
    tmp_path, cfg = synth_run
    data = tmp_path / "data"
    corpus = parse_corpus(data / "submissions.jsonl", data / "feedback.jsonl", data / "ratings.jsonl")
    base = FixtureBackend.from_jsonl(data / "transcript.jsonl")
    cache = ReplyCache(tmp_path / "run" / "cache")
    with pytest.raises(BackendUnavailableError):
        annotate_corpus(corpus, _Dying(base, 40), cache, parallelism=2)
    assert 0 < len(list((tmp_path / "run" / "cache").rglob("*.json"))) < 100
    assert main(["annotate", "--config", str(cfg)]) == 0
    resumed = {p.name: p.read_bytes() for p in (tmp_path / "run" / "annotations").iterdir()}

    fresh = annotate_corpus(corpus, FixtureBackend.from_jsonl(data / "transcript.jsonl"), ReplyCache(tmp_path / "fresh_cache"))
    write_annotations(tmp_path / "fresh" / "pedagogy.jsonl", fresh.pedagogy.values())
    write_annotations(tmp_path / "fresh" / "engagement.jsonl", fresh.engagement.values())
    assert resumed == {p.name: p.read_bytes() for p in (tmp_path / "fresh").iterdir()}


def test_backend_failure_exit_code(synth_run, monkeypatch):
    tmp_path, cfg = synth_run
    monkeypatch.delenv("TUTOREVAL_TEST_MISSING_KEY", raising=False)
    raw = yaml.safe_load(cfg.read_text())
    raw["judge"] = {"backend": "remote", "url": "http://127.0.0.1:9", "model": "m", "api_key_env": "TUTOREVAL_TEST_MISSING_KEY"}
    _config(cfg, **raw)
    assert main(["annotate", "--config", str(cfg)]) == 3


def test_evaluate_requires_annotations(synth_run):
    _, cfg = synth_run
    assert main(["evaluate", "--config", str(cfg)]) == 4


def test_evaluate_end_to_end_shape(synth_run):
    tmp_path, cfg = synth_run
    assert main(["annotate", "--config", str(cfg)]) == 0
    assert main(["evaluate", "--config", str(cfg)]) == 0
    out = tmp_path / "run"
    damr_md = (out / "tables" / "damr.md").read_text().splitlines()
    assert len([l for l in damr_md if l.startswith("| ") and "Dimension" not in l]) == 8
    summary = json.loads((out / "summary.json").read_text())
    for row in summary["tables"]["damr"]["rows"]:
        assert row["rate_a"] == row["matched_a"] / row["total_a"]
        assert f"{100 * row['rate_a']:.2f}" in next(l for l in damr_md if l.startswith(f"| {row['dimension']} "))
    assert (out / "figures" / "delta.svg").exists()
    assert len(summary["warnings"]) == len(set(summary["warnings"]))


def test_evaluate_without_ratings(synth_run):
    tmp_path, cfg = synth_run
    (tmp_path / "data" / "ratings.jsonl").write_text("")
    assert main(["annotate", "--config", str(cfg)]) == 0
    assert main(["evaluate", "--config", str(cfg)]) == 0
    assert "skipped: no ratings" in (tmp_path / "run" / "tables" / "regression.md").read_text()


def test_agreement_command(tmp_path, capsys):
    rows = [{"feedback_id": f"f{i}", "labels": {"coherence": 1 + i % 2}} for i in range(6)]
    a = write_jsonl(tmp_path / "a.jsonl", rows)
    b = write_jsonl(tmp_path / "b.jsonl", rows)
    cfg = _config(tmp_path / "c.yaml", out_dir="o")
    assert main(["agreement", "--config", str(cfg), str(a), str(b)]) == 0
    assert json.loads((tmp_path / "o" / "agreement.json").read_text())["macro_kappa"] == 1.0
    c = write_jsonl(tmp_path / "c.jsonl", [{"feedback_id": "zz", "labels": {"coherence": 1}}])
    assert main(["agreement", "--config", str(cfg), str(a), str(c)]) == 2
