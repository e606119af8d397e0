"""Pedagogy and engagement annotation through a judge backend.

Raw replies are cached; annotations are always re-derived from the cached
replies, so a parser fix never requires re-querying the judge.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from tutoreval.judge.backends import JudgeBackend, JudgeError, JudgeRequest
from tutoreval.judge.cache import ReplyCache, cache_key
from tutoreval.rubric import DIMENSIONS, LABELS, rubric_text

logger = logging.getLogger(__name__)

PROMPT_DIR = Path(__file__).parent / "prompts"
PLACEHOLDERS = ("problem", "history", "code", "prev_code", "next_code", "feedback_sentences", "rubric")
_PLACEHOLDER_RE = re.compile(r"\{(" + "|".join(PLACEHOLDERS) + r")\}")

PARSE_FAILURE = "judge-parse-failure"
NO_EDIT = "no code change between submissions"
REPROMPT = "Your previous reply could not be used ({error}). Reply again with only the JSON object described above."


class AnnotationError(JudgeError):
    """The judge reply could not be parsed, even after a reprompt."""


class ReplyParseError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str

    @classmethod
    def load(cls, task: str, directory: str | Path | None = None, version: str = "v1") -> "PromptTemplate":
        path = Path(directory or PROMPT_DIR) / f"{task}_{version}.txt"
        return cls(f"{task}_{version}", path.read_text(encoding="utf-8"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def render(self, **values: str) -> str:
        def sub(m: re.Match) -> str:
            key = m.group(1)
            if key not in values:
                raise KeyError(f"template {self.name} needs a value for {{{key}}}")
            return values[key]

        return _PLACEHOLDER_RE.sub(sub, self.text)


@dataclass(frozen=True)
class PedagogyAnnotation:
    feedback_id: str
    labels: dict[str, int]

    def __post_init__(self) -> None:
        if set(self.labels) != set(DIMENSIONS):
            raise ValueError(f"pedagogy labels must cover exactly {DIMENSIONS}")
        for dim, label in self.labels.items():
            if label not in LABELS:
                raise ValueError(f"label {label!r} for {dim} outside {LABELS}")

    def to_dict(self) -> dict:
        return {"feedback_id": self.feedback_id, "labels": {d: self.labels[d] for d in DIMENSIONS}}

    @classmethod
    def from_dict(cls, d: dict) -> "PedagogyAnnotation":
        return cls(d["feedback_id"], {k: int(v) for k, v in d["labels"].items()})


@dataclass(frozen=True)
class SentenceAttribution:
    sentence_index: int
    rel: int
    succ: int | None
    rationale: str

    def __post_init__(self) -> None:
        if self.rel not in (0, 1):
            raise ValueError("rel must be 0 or 1")
        if self.rel == 1 and self.succ not in (0, 1):
            raise ValueError("succ must be 0 or 1 when rel is 1")
        if self.rel == 0 and self.succ is not None:
            raise ValueError("succ is only defined when rel is 1")
        if self.rel == 1 and not self.rationale.strip():
            raise ValueError("rationale required when rel is 1")


@dataclass(frozen=True)
class EngagementAnnotation:
    feedback_id: str
    per_sentence: tuple[SentenceAttribution, ...]

    def __post_init__(self) -> None:
        if [s.sentence_index for s in self.per_sentence] != list(range(len(self.per_sentence))):
            raise ValueError("per_sentence entries must be indexed 0..M-1 in order")

    @property
    def rel_bits(self) -> list[int]:
        return [s.rel for s in self.per_sentence]

    @property
    def parse_failures(self) -> int:
        return sum(1 for s in self.per_sentence if s.rationale == PARSE_FAILURE)

    def to_dict(self) -> dict:
        return {
            "feedback_id": self.feedback_id,
            "per_sentence": [
                {"sentence_index": s.sentence_index, "rel": s.rel, "succ": s.succ, "rationale": s.rationale} for s in self.per_sentence
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EngagementAnnotation":
        return cls(
            d["feedback_id"],
            tuple(SentenceAttribution(int(s["sentence_index"]), int(s["rel"]), s.get("succ"), s.get("rationale", "")) for s in d["per_sentence"]),
        )


# -- reply parsing -------------------------------------------------------------

_FENCED_JSON = re.compile(r"^```(?:json)?\s*(.*?)\s*```$", re.DOTALL)


def _load_json(reply: str):
    text = reply.strip()
    m = _FENCED_JSON.match(text)
    if m:
        text = m.group(1)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReplyParseError(f"invalid JSON: {exc.msg}") from None


def parse_pedagogy_reply(reply: str, feedback_id: str) -> PedagogyAnnotation:
    obj = _load_json(reply)
    if isinstance(obj, dict) and isinstance(obj.get("labels"), dict):
        obj = obj["labels"]
    if not isinstance(obj, dict):
        raise ReplyParseError("expected a JSON object of labels")
    labels = {}
    for dim in DIMENSIONS:
        if dim not in obj:
            raise ReplyParseError(f"missing dimension {dim}")
        v = obj[dim]
        if isinstance(v, str) and v.strip().isdigit():
            v = int(v.strip())
        if isinstance(v, bool) or not isinstance(v, int) or v not in LABELS:
            raise ReplyParseError(f"label for {dim} must be one of {LABELS}, got {v!r}")
        labels[dim] = v
    return PedagogyAnnotation(feedback_id, labels)


def _bit(v) -> int | None:
    if isinstance(v, bool):
        return int(v)
    if v in (0, 1):
        return int(v)
    if isinstance(v, str) and v.strip() in ("0", "1"):
        return int(v.strip())
    return None


def parse_engagement_reply(reply: str, feedback_id: str, n_sentences: int) -> EngagementAnnotation:
    """Parse an engagement reply.

    A reply that is not a JSON list of sentence entries raises (and triggers a
    reprompt). Individual unusable entries only downgrade that sentence to
    rel = 0 with the parse-failure rationale.
    """
    obj = _load_json(reply)
    entries = obj.get("sentences") if isinstance(obj, dict) else obj
    if not isinstance(entries, list):
        raise ReplyParseError("expected a 'sentences' list")
    by_index: dict[int, dict] = {}
    for pos, entry in enumerate(entries):
        if not isinstance(entry, dict):
            continue
        idx = entry.get("index", entry.get("sentence_index", pos))
        if isinstance(idx, int) and not isinstance(idx, bool) and idx not in by_index:
            by_index[idx] = entry
    out = []
    for i in range(n_sentences):
        entry = by_index.get(i)
        failure = SentenceAttribution(i, 0, None, PARSE_FAILURE)
        if entry is None:
            out.append(failure)
            continue
        rel = _bit(entry.get("rel"))
        rationale = entry.get("rationale") or ""
        if rel is None or not isinstance(rationale, str):
            out.append(failure)
            continue
        if rel == 0:
            out.append(SentenceAttribution(i, 0, None, rationale))
            continue
        succ = _bit(entry.get("succ"))
        if succ is None or not rationale.strip():
            out.append(failure)
            continue
        out.append(SentenceAttribution(i, 1, succ, rationale))
    return EngagementAnnotation(feedback_id, tuple(out))


# -- querying ------------------------------------------------------------------

def _numbered(sentences: Sequence[str]) -> str:
    return "\n".join(f"[{i}] {s}" for i, s in enumerate(sentences))


def _format_history(prior: Sequence[tuple[str, str | None]]) -> str:
    if not prior:
        return "(none)"
    blocks = []
    for k, (code, fb) in enumerate(prior):
        blocks.append(f"Attempt {k}:\n```\n{code}\n```\nTutor feedback: {fb if fb else '(none)'}")
    return "\n\n".join(blocks)


def _query_with_cache(
    backend: JudgeBackend,
    cache: ReplyCache | None,
    template: PromptTemplate,
    task: str,
    item_id: str,
    inputs: dict,
    prompt: str,
    parse: Callable[[str], object],
):
    # the item id is part of the key: annotations are per item even when two items share inputs
    key = cache_key(backend.identity, template.sha256, task, {**inputs, "item_id": item_id})
    replies = None
    if cache is not None:
        with cache.lock(key):
            replies = cache.get(key)
            if replies is None:
                replies = _ask(backend, JudgeRequest(task, item_id, ({"role": "user", "content": prompt},)), parse)
                cache.put(key, replies, {"task": task, "item_id": item_id, "template": template.name})
    else:
        replies = _ask(backend, JudgeRequest(task, item_id, ({"role": "user", "content": prompt},)), parse)
    errors = []
    for reply in replies:
        try:
            return parse(reply)
        except ReplyParseError as exc:
            errors.append(str(exc))
    raise AnnotationError(f"{task} reply for {item_id!r} unparseable after reprompt: {'; '.join(errors)}")


def _ask(backend: JudgeBackend, request: JudgeRequest, parse) -> list[str]:
    first = backend.complete(request)
    try:
        parse(first)
        return [first]
    except ReplyParseError as exc:
        logger.info("reprompting %s/%s: %s", request.task, request.item_id, exc)
        second = backend.complete(request.with_followup(first, REPROMPT.format(error=exc)))
        return [first, second]


def annotate_pedagogy(
    backend: JudgeBackend,
    problem_statement: str,
    prior_context: Sequence[tuple[str, str | None]],
    code: str,
    feedback,
    *,
    cache: ReplyCache | None = None,
    template: PromptTemplate | None = None,
) -> PedagogyAnnotation:
    """Label one feedback message on the eight rubric dimensions.

    ``prior_context`` holds (code, feedback text or None) for earlier attempts.
    """
    template = template or PromptTemplate.load("pedagogy")
    sentences = list(feedback.sentences)
    inputs = {
        "problem": problem_statement,
        "history": [[c, f] for c, f in prior_context],
        "code": code,
        "feedback_sentences": sentences,
        "rubric": rubric_text(),
    }
    prompt = template.render(
        problem=problem_statement or "(not provided)",
        history=_format_history(prior_context),
        code=code,
        feedback_sentences="\n".join(sentences),
        rubric=inputs["rubric"],
        prev_code="",
        next_code="",
    )
    fid = feedback.feedback_id
    return _query_with_cache(backend, cache, template, "pedagogy", fid, inputs, prompt, lambda r: parse_pedagogy_reply(r, fid))


def annotate_engagement(
    backend: JudgeBackend,
    prev_code: str,
    feedback,
    next_code: str,
    *,
    cache: ReplyCache | None = None,
    template: PromptTemplate | None = None,
) -> EngagementAnnotation:
    """Attribute the edit from ``prev_code`` to ``next_code`` to feedback sentences."""
    sentences = list(feedback.sentences)
    fid = feedback.feedback_id
    if not sentences:
        raise ValueError(f"feedback {fid!r} has not been segmented")
    if prev_code == next_code:
        return EngagementAnnotation(fid, tuple(SentenceAttribution(i, 0, None, NO_EDIT) for i in range(len(sentences))))
    template = template or PromptTemplate.load("engagement")
    inputs = {"prev_code": prev_code, "next_code": next_code, "feedback_sentences": sentences}
    prompt = template.render(
        prev_code=prev_code,
        next_code=next_code,
        feedback_sentences=_numbered(sentences),
        problem="",
        history="",
        code="",
        rubric="",
    )
    return _query_with_cache(
        backend, cache, template, "engagement", fid, inputs, prompt, lambda r: parse_engagement_reply(r, fid, len(sentences))
    )
