from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def small_dir() -> Path:
    return FIXTURES / "small"


@pytest.fixture
def small_corpus(small_dir):
    from tutoreval.corpus import parse_corpus

    return parse_corpus(small_dir / "submissions.jsonl", small_dir / "feedback.jsonl", small_dir / "ratings.jsonl")


def write_jsonl(path: Path, rows) -> Path:
    import json

    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path
