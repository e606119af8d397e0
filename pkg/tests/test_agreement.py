import pytest

from conftest import write_jsonl
from oracles import labels_from_confusion
from tutoreval.judge import AgreementError, agreement_report
from tutoreval.judge.agreement import UNDEFINED_VARIANCE
from tutoreval.rubric import DIMENSIONS


def _ped_rows(labels_by_item):
    return [{"feedback_id": fid, "labels": labels} for fid, labels in labels_by_item.items()]


def test_identical_files_have_perfect_kappa(tmp_path):
    items = {f"f{i}": {d: 1 + (i + j) % 3 for j, d in enumerate(DIMENSIONS)} for i in range(6)}
    a = write_jsonl(tmp_path / "a.jsonl", _ped_rows(items))
    b = write_jsonl(tmp_path / "b.jsonl", _ped_rows(items))
    report = agreement_report(a, b)
    assert [d.dimension for d in report.dimensions] == list(DIMENSIONS)
    assert all(d.kappa == 1.0 and d.percent_agreement == 1.0 for d in report.dimensions)
    assert report.macro_kappa == 1.0


def test_binary_rel_confusion_gives_point_four(tmp_path):
    la, lb = labels_from_confusion([[20, 5], [10, 15]])

    def rows(labels):
        return [{"feedback_id": f"f{i}", "per_sentence": [{"sentence_index": 0, "rel": v, "succ": None if v == 0 else 1, "rationale": "r"}]} for i, v in enumerate(labels)]

    report = agreement_report(write_jsonl(tmp_path / "a.jsonl", rows(la)), write_jsonl(tmp_path / "b.jsonl", rows(lb)))
    assert report.kappa("rel") == 0.4
    assert report.dimensions[0].percent_agreement == pytest.approx(0.7)


def test_constant_annotator_warns(tmp_path):
    a = {f"i{k}": {"rel": 1} for k in range(6)}
    b = {f"i{k}": {"rel": k % 2} for k in range(6)}
    report = agreement_report(a, b)
    assert report.kappa("rel") == 0.0
    assert any(UNDEFINED_VARIANCE in w for w in report.warnings)


def test_disjoint_ids_rejected():
    with pytest.raises(AgreementError):
        agreement_report({"a": {"rel": 1}}, {"b": {"rel": 1}})


def test_partial_overlap_warns():
    report = agreement_report({"a": {"x": 1}, "b": {"x": 2}, "c": {"x": 1}}, {"a": {"x": 1}, "b": {"x": 2}})
    assert report.n_items == 2
    assert report.warnings
