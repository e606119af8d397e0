"""Annotate a whole corpus, in parallel, through the reply cache."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from tutoreval.corpus import Corpus, engagement_pairs, prior_context
from tutoreval.judge.annotate import (
    AnnotationError,
    EngagementAnnotation,
    PedagogyAnnotation,
    PromptTemplate,
    annotate_engagement,
    annotate_pedagogy,
)
from tutoreval.judge.backends import JudgeBackend
from tutoreval.judge.cache import ReplyCache

logger = logging.getLogger(__name__)


@dataclass
class AnnotationRun:
    pedagogy: dict[str, PedagogyAnnotation] = field(default_factory=dict)
    engagement: dict[str, EngagementAnnotation] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)
    sentence_parse_failures: int = 0
    cache_hits: int = 0
    cache_misses: int = 0

    def log(self) -> dict:
        return {
            "pedagogy_annotations": len(self.pedagogy),
            "engagement_annotations": len(self.engagement),
            "failures": list(self.failures),
            "sentence_parse_failures": self.sentence_parse_failures,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
        }


def annotate_corpus(
    corpus: Corpus,
    backend: JudgeBackend,
    cache: ReplyCache,
    which: str = "both",
    parallelism: int = 1,
    problems: Mapping[str, str] | None = None,
    prompt_dir: str | Path | None = None,
) -> AnnotationRun:
    """Annotate every feedback message (pedagogy) and every engagement pair.

    Parse failures are recorded and the item is left out; backend errors
    propagate so the caller can stop and resume later from the cache.
    """
    if which not in ("pedagogy", "engagement", "both"):
        raise ValueError(f"unknown annotation kind {which!r}")
    problems = problems or {}
    subs = corpus.submission_index
    run = AnnotationRun()
    hits0, misses0 = cache.hits, cache.misses
    jobs = []

    if which in ("pedagogy", "both"):
        template = PromptTemplate.load("pedagogy", prompt_dir)
        for fid in sorted(corpus.feedback):
            fb = corpus.feedback[fid]
            sub = subs[fb.submission_id]
            history = [(s.code, f.text if f else None) for s, f in prior_context(corpus, sub.submission_id)]

            def job(fb=fb, sub=sub, history=history, template=template):
                return annotate_pedagogy(
                    backend, problems.get(sub.problem_id, ""), history, sub.code, fb, cache=cache, template=template
                )

            jobs.append(("pedagogy", fid, job))

    if which in ("engagement", "both"):
        template = PromptTemplate.load("engagement", prompt_dir)
        for pair in sorted(engagement_pairs(corpus), key=lambda p: p.feedback.feedback_id):

            def job(pair=pair, template=template):
                return annotate_engagement(backend, pair.prev.code, pair.feedback, pair.next.code, cache=cache, template=template)

            jobs.append(("engagement", pair.feedback.feedback_id, job))

    def guarded(item):
        task, fid, fn = item
        try:
            return task, fid, fn(), None
        except AnnotationError as exc:
            return task, fid, None, str(exc)

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        results = list(pool.map(guarded, jobs))

    for task, fid, ann, err in results:
        if err is not None:
            logger.warning("excluding %s annotation for %s: %s", task, fid, err)
            run.failures.append({"task": task, "feedback_id": fid, "error": err})
        elif task == "pedagogy":
            run.pedagogy[fid] = ann
        else:
            run.engagement[fid] = ann
            run.sentence_parse_failures += ann.parse_failures
    run.cache_hits = cache.hits - hits0
    run.cache_misses = cache.misses - misses0
    return run


def write_annotations(path: str | Path, annotations: Iterable) -> None:
    rows = sorted(annotations, key=lambda a: a.feedback_id)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a in rows:
            fh.write(json.dumps(a.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_pedagogy(path: str | Path) -> dict[str, PedagogyAnnotation]:
    return {d["feedback_id"]: PedagogyAnnotation.from_dict(d) for d in _read_jsonl(Path(path))}


def load_engagement(path: str | Path) -> dict[str, EngagementAnnotation]:
    return {d["feedback_id"]: EngagementAnnotation.from_dict(d) for d in _read_jsonl(Path(path))}
