"""Seeded synthetic corpus with planted judge labels and helpfulness model.

Everything is drawn from a single ``random.Random(seed)`` in a fixed order, so
the emitted files are byte-identical for a given configuration.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping

from tutoreval.rubric import DIMENSIONS, LABELS, DesiredLabelRubric

SENTENCES = (
    "Look closely at how {fn} handles the base case.",
    "Your loop stops one step too early.",
    "Consider what happens when the input is empty.",
    "Try tracing {fn} by hand on a small example.",
    "Check which value you return at the end.",
    "Think about whether the comparison should be inclusive.",
    "The recursive call does not make the problem smaller.",
    "Make sure every branch returns a value.",
    "Compare your output with the expected output in the failing test.",
    "Remember that range stops before its upper bound.",
    "You are updating the accumulator in the wrong place.",
    "Nice progress so far, keep going!",
)

DEFAULT_BETA = {
    "const": -0.4,
    "mistake_identification": -0.3,
    "mistake_location": 0.2,
    "revealing_answer": -0.2,
    "providing_guidance": 0.4,
    "actionability": -0.15,
    "coherence": -0.2,
    "tutor_tone": 0.1,
    "humanness": 0.15,
    "rel_score": 0.8,
    "succ_score": 0.5,
    "baseline_tutor": -0.3,
}


class SynthError(ValueError):
    pass


def _check_prob(name: str, p: float) -> None:
    if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
        raise SynthError(f"{name} must be a probability, got {p!r}")


@dataclass
class TutorProfile:
    rel_prob: float = 0.8
    succ_prob: float = 0.6
    desired_prob: float | dict[str, float] = 0.9

    def desired(self, dim: str) -> float:
        if isinstance(self.desired_prob, Mapping):
            return self.desired_prob.get(dim, 0.9)
        return self.desired_prob

    def validate(self, tutor: str) -> None:
        _check_prob(f"{tutor}.rel_prob", self.rel_prob)
        _check_prob(f"{tutor}.succ_prob", self.succ_prob)
        if isinstance(self.desired_prob, Mapping):
            unknown = set(self.desired_prob) - set(DIMENSIONS)
            if unknown:
                raise SynthError(f"{tutor}.desired_prob has unknown dimensions {sorted(unknown)}")
        for d in DIMENSIONS:
            _check_prob(f"{tutor}.desired_prob[{d}]", self.desired(d))


def _default_tutors() -> dict[str, TutorProfile]:
    return {
        "baseline": TutorProfile(rel_prob=0.7, succ_prob=0.45, desired_prob=0.88),
        "misconception": TutorProfile(rel_prob=0.85, succ_prob=0.55, desired_prob=0.95),
    }


@dataclass
class GeneratorConfig:
    seed: int = 42
    n_students: int = 40
    n_problems: int = 3  # per assignment
    assignments: int = 2
    mean_attempts: float = 3.0
    abandon_prob: float = 0.1
    max_sentences: int = 4
    rating_prob: float = 0.5
    tutors: dict[str, TutorProfile] = field(default_factory=_default_tutors)
    baseline_tutor: str = "baseline"
    beta: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_BETA))
    likert_cutoff: int = 4

    def validate(self) -> None:
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise SynthError("seed must be a 64-bit non-negative integer")
        if self.n_students < 1 or self.n_problems < 1 or self.assignments < 1:
            raise SynthError("zero streams requested: n_students, n_problems and assignments must all be >= 1")
        if not self.tutors:
            raise SynthError("at least one tutor profile is required")
        if self.baseline_tutor not in self.tutors:
            raise SynthError(f"baseline tutor {self.baseline_tutor!r} has no profile")
        if self.mean_attempts < 1:
            raise SynthError("mean_attempts must be >= 1")
        if not 1 <= self.max_sentences <= len(SENTENCES):
            raise SynthError(f"max_sentences must be in 1..{len(SENTENCES)}")
        _check_prob("abandon_prob", self.abandon_prob)
        _check_prob("rating_prob", self.rating_prob)
        missing = set(DEFAULT_BETA) - set(self.beta)
        if missing:
            raise SynthError(f"beta is missing {sorted(missing)}")
        for name, prof in self.tutors.items():
            prof.validate(name)

    @classmethod
    def from_dict(cls, d: Mapping) -> "GeneratorConfig":
        d = dict(d)
        if "tutors" in d:
            d["tutors"] = {k: v if isinstance(v, TutorProfile) else TutorProfile(**v) for k, v in d["tutors"].items()}
        if "beta" in d:
            d["beta"] = {**DEFAULT_BETA, **d["beta"]}
        return cls(**d)


def _label(rng: random.Random, rubric: DesiredLabelRubric, dim: str, desired: bool) -> int:
    pool = sorted(rubric.desired[dim]) if desired else [l for l in LABELS if l not in rubric.desired[dim]]
    return rng.choice(pool)


def _code(student: str, problem: str, attempt: int, passed: bool) -> str:
    body = "    return sum(xs)" if passed else f"    return sum(xs[{attempt + 1}:])"
    return f"def solve_{problem}(xs):\n    # {student}, attempt {attempt}\n{body}"


def _sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))


def _dump(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n")


def generate(config: GeneratorConfig, out_dir: str | Path) -> dict[str, Path]:
    """Write a synthetic corpus, judge transcript and ground truth under ``out_dir``."""
    config.validate()
    rubric = DesiredLabelRubric.default()
    rng = random.Random(config.seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tutors = sorted(config.tutors)
    start = datetime(2024, 9, 1, tzinfo=timezone.utc)
    q_fail = (config.mean_attempts - 1.0) / config.mean_attempts

    submissions, feedback, ratings, transcript, problems = [], [], [], [], []
    counts = {t: {"feedback": 0, "engagement_pairs": 0, "sentences_judged": 0, "rated": 0, "streams": 0} for t in tutors}
    n_sub = n_fb = 0
    for a in range(1, config.assignments + 1):
        for p in range(1, config.n_problems + 1):
            problems.append({"problem_id": f"a{a}p{p}", "statement": f"Write solve_a{a}p{p}(xs) returning the sum of xs."})

    for s in range(config.n_students):
        student = f"u{s:04d}"
        tutor = tutors[s % len(tutors)]
        prof = config.tutors[tutor]
        for a in range(1, config.assignments + 1):
            for p in range(1, config.n_problems + 1):
                problem = f"a{a}p{p}"
                counts[tutor]["streams"] += 1
                n_fail = 0
                while rng.random() < q_fail and n_fail < 11:
                    n_fail += 1
                abandoned = rng.random() < config.abandon_prob
                n_attempts = max(1, n_fail + (0 if abandoned else 1))
                t0 = start + timedelta(days=7 * a, hours=s, minutes=10 * p)
                pending = None  # feedback awaiting its successor submission
                for t in range(n_attempts):
                    n_sub += 1
                    sid = f"s{n_sub:06d}"
                    passed = not abandoned and t == n_attempts - 1
                    submissions.append(
                        {
                            "submission_id": sid,
                            "tutor_id": tutor,
                            "student_id": student,
                            "assignment_id": a,
                            "problem_id": problem,
                            "attempt_index": t,
                            "timestamp": (t0 + timedelta(minutes=3 * t)).strftime("%Y-%m-%dT%H:%M:%SZ"),
                            "code": _code(student, problem, t, passed),
                            "autograder_output": "PASSED" if passed else f"FAILED {t % 3}/3",
                            "passed": passed,
                        }
                    )
                    if pending is not None:
                        transcript.append(pending)
                        counts[tutor]["engagement_pairs"] += 1
                        counts[tutor]["sentences_judged"] += len(pending["reply"]["sentences"])
                        pending = None
                    if passed:
                        continue
                    n_fb += 1
                    fid = f"f{n_fb:06d}"
                    counts[tutor]["feedback"] += 1
                    m = rng.randint(1, config.max_sentences)
                    text = " ".join(x.format(fn=f"solve_{problem}") for x in rng.sample(SENTENCES, m))
                    feedback.append({"feedback_id": fid, "submission_id": sid, "text": text})
                    desired = {d: rng.random() < prof.desired(d) for d in DIMENSIONS}
                    labels = {d: _label(rng, rubric, d, desired[d]) for d in DIMENSIONS}
                    transcript.append({"task": "pedagogy", "item_id": fid, "reply": labels})
                    entries = []
                    for i in range(m):
                        rel = int(rng.random() < prof.rel_prob)
                        succ = int(rng.random() < prof.succ_prob) if rel else None
                        entries.append({"index": i, "rel": rel, "succ": succ, "rationale": f"edit follows sentence {i}" if rel else "not reflected in the edit"})
                    # abandoned final attempts have no successor, so their script is never emitted
                    if t < n_attempts - 1:
                        pending = {"task": "engagement", "item_id": fid, "reply": {"sentences": entries}}
                    if rng.random() < config.rating_prob:
                        n_rel = sum(e["rel"] for e in entries)
                        n_succ = sum(e["succ"] or 0 for e in entries)
                        z = config.beta["const"] + sum(config.beta[d] * desired[d] for d in DIMENSIONS)
                        z += config.beta["rel_score"] * n_rel / m
                        z += config.beta["succ_score"] * (n_succ / n_rel if n_rel else 0.0)
                        z += config.beta["baseline_tutor"] * (tutor == config.baseline_tutor)
                        y = rng.random() < _sigmoid(z)
                        likert = rng.choice((4, 5)) if y else rng.choice((1, 2, 3))
                        ratings.append({"submission_id": sid, "likert": likert})
                        counts[tutor]["rated"] += 1

    if not submissions:
        raise SynthError("zero streams generated")
    paths = {
        "submissions": out_dir / "submissions.jsonl",
        "feedback": out_dir / "feedback.jsonl",
        "ratings": out_dir / "ratings.jsonl",
        "problems": out_dir / "problems.jsonl",
        "transcript": out_dir / "transcript.jsonl",
        "ground_truth": out_dir / "ground_truth.json",
    }
    _dump(paths["submissions"], submissions)
    _dump(paths["feedback"], feedback)
    _dump(paths["ratings"], ratings)
    _dump(paths["problems"], problems)
    _dump(paths["transcript"], sorted(transcript, key=lambda r: (r["task"], r["item_id"])))
    truth = {
        "config": asdict(config),
        "tutors": {
            t: {
                "rel_prob": config.tutors[t].rel_prob,
                "succ_prob": config.tutors[t].succ_prob,
                "desired_prob": {d: config.tutors[t].desired(d) for d in DIMENSIONS},
            }
            for t in tutors
        },
        "beta": dict(config.beta),
        "counts": counts,
        "notes": "ratings impute succ_score = 0 when no sentence is relevant",
    }
    paths["ground_truth"].write_text(json.dumps(truth, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return paths
