"""Log parsing, validation and submission-stream assembly.

Three line-delimited JSON files make up a corpus: submissions, feedback
(one tutor message per failed submission) and optional Likert ratings.
"""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field, fields
from functools import cached_property
from datetime import datetime
from pathlib import Path
from typing import Any, Iterator

from tutoreval.judge.segment import SegmentationError, segment_sentences

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    """A malformed record, with the file and line it came from."""


class ValidationError(CorpusError):
    """Records parse individually but violate cross-record constraints."""

    def __init__(self, message: str, ids: list[str] | None = None):
        self.ids = list(ids or [])
        if self.ids:
            message = f"{message}: {', '.join(self.ids)}"
        super().__init__(message)


@dataclass(frozen=True)
class Submission:
    submission_id: str
    tutor_id: str
    student_id: str
    assignment_id: int
    problem_id: str
    attempt_index: int
    timestamp: str
    code: str
    autograder_output: str
    passed: bool

    @property
    def stream_key(self) -> tuple[str, str]:
        return (self.student_id, self.problem_id)


@dataclass(frozen=True)
class FeedbackMessage:
    feedback_id: str
    submission_id: str
    text: str
    sentences: tuple[str, ...] = ()

    @property
    def M(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class Rating:
    submission_id: str
    likert: int


@dataclass(frozen=True)
class SubmissionStream:
    student_id: str
    problem_id: str
    assignment_id: int
    tutor_id: str
    submissions: tuple[Submission, ...]

    @property
    def abandoned(self) -> bool:
        return not self.submissions[-1].passed


@dataclass(frozen=True)
class EngagementPair:
    prev: Submission
    feedback: FeedbackMessage
    next: Submission


@dataclass
class CorpusReport:
    submissions_read: int = 0
    feedback_read: int = 0
    ratings_read: int = 0
    submissions_linked: int = 0
    feedback_linked: int = 0
    ratings_linked: int = 0
    ratings_dropped: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def linkage(self) -> tuple[int, int, int]:
        return (self.submissions_linked, self.feedback_linked, self.ratings_linked)

    def to_dict(self) -> dict:
        return {
            "submissions_read": self.submissions_read,
            "feedback_read": self.feedback_read,
            "ratings_read": self.ratings_read,
            "submissions_linked": self.submissions_linked,
            "feedback_linked": self.feedback_linked,
            "ratings_linked": self.ratings_linked,
            "ratings_dropped": self.ratings_dropped,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class Corpus:
    streams: tuple[SubmissionStream, ...]
    feedback: dict[str, FeedbackMessage]  # by feedback_id
    ratings: dict[str, Rating]  # by submission_id
    report: CorpusReport = field(compare=False, default_factory=CorpusReport)

    def submissions(self) -> Iterator[Submission]:
        for stream in self.streams:
            yield from stream.submissions

    # indices are built once per corpus; callers must treat them as read-only
    @cached_property
    def submission_index(self) -> dict[str, Submission]:
        return {s.submission_id: s for s in self.submissions()}

    @cached_property
    def feedback_by_submission(self) -> dict[str, FeedbackMessage]:
        return {f.submission_id: f for f in self.feedback.values()}

    @cached_property
    def _stream_index(self) -> dict[str, SubmissionStream]:
        return {s.submission_id: stream for stream in self.streams for s in stream.submissions}

    @property
    def tutor_ids(self) -> list[str]:
        return sorted({s.tutor_id for s in self.streams})

    def stream_of(self, submission_id: str) -> SubmissionStream:
        return self._stream_index[submission_id]

    def rating_for_feedback(self, feedback_id: str) -> Rating | None:
        return self.ratings.get(self.feedback[feedback_id].submission_id)


_SUBMISSION_TYPES: dict[str, type | tuple[type, ...]] = {
    "submission_id": str,
    "tutor_id": str,
    "student_id": str,
    "assignment_id": int,
    "problem_id": str,
    "attempt_index": int,
    "timestamp": str,
    "code": str,
    "autograder_output": str,
    "passed": bool,
}
_FEEDBACK_TYPES = {"feedback_id": str, "submission_id": str, "text": str}
_RATING_TYPES = {"submission_id": str, "likert": int}


def _read_records(path: Path, schema: dict[str, Any], warnings: list[str]) -> list[tuple[int, dict]]:
    out = []
    extras: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            for key, typ in schema.items():
                if key not in obj:
                    raise CorpusError(f"{path}:{lineno}: missing field {key!r}")
                value = obj[key]
                # bool is a subclass of int; reject it where an int is expected
                if not isinstance(value, typ) or (typ is int and isinstance(value, bool)):
                    raise CorpusError(f"{path}:{lineno}: field {key!r} has wrong type {type(value).__name__}")
            extras.update(set(obj) - set(schema))
            out.append((lineno, {k: obj[k] for k in schema}))
    if extras:
        msg = f"{path.name}: ignored unknown keys {sorted(extras)}"
        logger.warning(msg)
        warnings.append(msg)
    return out


def _parse_time(ts: str, where: str) -> datetime:
    try:
        return datetime.fromisoformat(ts.replace("Z", "+00:00"))
    except ValueError:
        raise CorpusError(f"{where}: timestamp {ts!r} is not ISO-8601") from None


def assemble_streams(submissions: list[Submission]) -> tuple[SubmissionStream, ...]:
    """Group submissions by (student, problem) and check stream invariants."""
    groups: dict[tuple[str, str], list[Submission]] = defaultdict(list)
    for s in submissions:
        groups[s.stream_key].append(s)
    streams = []
    problems: list[str] = []
    for key in sorted(groups):
        subs = sorted(groups[key], key=lambda s: s.attempt_index)
        where = f"stream student={key[0]} problem={key[1]}"
        indices = [s.attempt_index for s in subs]
        if indices != list(range(len(subs))):
            problems.append(f"{where}: attempt_index values {indices} are not consecutive from 0")
            continue
        if len({s.tutor_id for s in subs}) > 1 or len({s.assignment_id for s in subs}) > 1:
            problems.append(f"{where}: mixes tutor_id or assignment_id values")
            continue
        times = [_parse_time(s.timestamp, where) for s in subs]
        try:
            increasing = all(a < b for a, b in zip(times, times[1:]))
        except TypeError:
            raise CorpusError(f"{where}: mixes timezone-aware and naive timestamps") from None
        if not increasing:
            problems.append(f"{where}: timestamps are not strictly increasing")
            continue
        if any(s.passed for s in subs[:-1]):
            problems.append(f"{where}: a passing submission is followed by further attempts")
            continue
        first = subs[0]
        streams.append(SubmissionStream(first.student_id, first.problem_id, first.assignment_id, first.tutor_id, tuple(subs)))
    if problems:
        raise ValidationError("invalid submission streams:\n  " + "\n  ".join(problems))
    return tuple(streams)


def parse_corpus(
    submissions_path: str | Path,
    feedback_path: str | Path,
    ratings_path: str | Path | None = None,
) -> Corpus:
    """Read, validate and link the three log files."""
    report = CorpusReport()
    warnings = report.warnings
    submissions_path = Path(submissions_path)
    feedback_path = Path(feedback_path)

    subs: list[Submission] = []
    seen: dict[str, int] = {}
    for lineno, rec in _read_records(submissions_path, _SUBMISSION_TYPES, warnings):
        sid = rec["submission_id"]
        if sid in seen:
            raise CorpusError(f"{submissions_path}:{lineno}: duplicate submission_id {sid!r} (first on line {seen[sid]})")
        seen[sid] = lineno
        if rec["attempt_index"] < 0:
            raise CorpusError(f"{submissions_path}:{lineno}: negative attempt_index")
        _parse_time(rec["timestamp"], f"{submissions_path}:{lineno}")
        subs.append(Submission(**rec))
    report.submissions_read = len(subs)
    streams = assemble_streams(subs)
    by_id = {s.submission_id: s for s in subs}

    feedback: dict[str, FeedbackMessage] = {}
    bad_refs: list[str] = []
    fb_for_sub: dict[str, str] = {}
    for lineno, rec in _read_records(feedback_path, _FEEDBACK_TYPES, warnings):
        report.feedback_read += 1
        fid, sid = rec["feedback_id"], rec["submission_id"]
        if fid in feedback:
            raise CorpusError(f"{feedback_path}:{lineno}: duplicate feedback_id {fid!r}")
        target = by_id.get(sid)
        if target is None or target.passed:
            bad_refs.append(sid)
            continue
        if sid in fb_for_sub:
            raise CorpusError(f"{feedback_path}:{lineno}: submission {sid!r} already has feedback {fb_for_sub[sid]!r}")
        try:
            sentences = tuple(segment_sentences(rec["text"]))
        except SegmentationError as exc:
            raise CorpusError(f"{feedback_path}:{lineno}: {exc}") from None
        feedback[fid] = FeedbackMessage(fid, sid, rec["text"], sentences)
        fb_for_sub[sid] = fid
    if bad_refs:
        raise ValidationError("feedback references missing or passed submissions", bad_refs)
    report.feedback_linked = len(feedback)

    ratings: dict[str, Rating] = {}
    if ratings_path is not None:
        ratings_path = Path(ratings_path)
        unknown: list[str] = []
        for lineno, rec in _read_records(ratings_path, _RATING_TYPES, warnings):
            report.ratings_read += 1
            sid, likert = rec["submission_id"], rec["likert"]
            if not 1 <= likert <= 5:
                raise CorpusError(f"{ratings_path}:{lineno}: likert {likert} outside 1..5")
            if sid not in by_id:
                unknown.append(sid)
                continue
            if sid not in fb_for_sub:
                report.ratings_dropped += 1
                msg = f"{ratings_path.name}:{lineno}: rating for submission {sid!r} without feedback dropped"
                logger.warning(msg)
                warnings.append(msg)
                continue
            if sid in ratings:
                report.ratings_dropped += 1
                msg = f"{ratings_path.name}:{lineno}: duplicate rating for submission {sid!r}; keeping the later one"
                logger.warning(msg)
                warnings.append(msg)
            ratings[sid] = Rating(sid, likert)
        if unknown:
            raise ValidationError("ratings reference unknown submissions", unknown)
    report.ratings_linked = len(ratings)
    report.submissions_linked = len(subs)
    return Corpus(streams=streams, feedback=feedback, ratings=ratings, report=report)


def engagement_pairs(corpus: Corpus) -> list[EngagementPair]:
    """(previous submission, its feedback, next submission) for every revision.

    The last submission of a stream has no successor, so feedback on an
    abandoned stream's final attempt yields no pair.
    """
    fb = corpus.feedback_by_submission
    pairs = []
    for stream in corpus.streams:
        subs = stream.submissions
        for prev, nxt in zip(subs, subs[1:]):
            f = fb.get(prev.submission_id)
            if f is not None:
                pairs.append(EngagementPair(prev, f, nxt))
    return pairs


def prior_context(corpus: Corpus, submission_id: str) -> list[tuple[Submission, FeedbackMessage | None]]:
    """Earlier attempts in the same stream, each with its feedback if any."""
    stream = corpus.stream_of(submission_id)
    fb = corpus.feedback_by_submission
    out = []
    for s in stream.submissions:
        if s.submission_id == submission_id:
            break
        out.append((s, fb.get(s.submission_id)))
    return out


def _dump_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def write_corpus(corpus: Corpus, out_dir: str | Path) -> dict[str, Path]:
    """Serialise a corpus back to the three line-delimited files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "submissions": out_dir / "submissions.jsonl",
        "feedback": out_dir / "feedback.jsonl",
        "ratings": out_dir / "ratings.jsonl",
    }
    sub_fields = [f.name for f in fields(Submission)]
    _dump_jsonl(paths["submissions"], [{k: getattr(s, k) for k in sub_fields} for s in corpus.submissions()])
    _dump_jsonl(
        paths["feedback"],
        [{"feedback_id": f.feedback_id, "submission_id": f.submission_id, "text": f.text} for f in sorted(corpus.feedback.values(), key=lambda f: f.feedback_id)],
    )
    _dump_jsonl(paths["ratings"], [{"submission_id": r.submission_id, "likert": r.likert} for r in sorted(corpus.ratings.values(), key=lambda r: r.submission_id)])
    return paths
