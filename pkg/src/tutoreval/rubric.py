"""The eight pedagogical dimensions, their label scales and desired labels."""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

DIMENSIONS: tuple[str, ...] = (
    "mistake_identification",
    "mistake_location",
    "revealing_answer",
    "providing_guidance",
    "actionability",
    "coherence",
    "tutor_tone",
    "humanness",
)

LABELS = (1, 2, 3)

_YES_SCALE = {1: "Yes", 2: "To some extent", 3: "No"}

DEFINITIONS: Mapping[str, tuple[str, Mapping[int, str]]] = MappingProxyType(
    {
        "mistake_identification": ("Has the tutor identified or recognized a mistake in the student's response?", _YES_SCALE),
        "mistake_location": ("Does the tutor's response accurately point to a genuine mistake and its location?", _YES_SCALE),
        "revealing_answer": (
            "Does the tutor reveal the final answer (whether correct or not)?",
            {1: "Yes (correct)", 2: "Yes (incorrect)", 3: "No"},
        ),
        "providing_guidance": (
            "Does the tutor offer correct and relevant guidance, such as an explanation, elaboration, hint, or examples?",
            _YES_SCALE,
        ),
        "actionability": ("Is it clear from the tutor's feedback what the student should do next?", _YES_SCALE),
        "coherence": ("Is the tutor's response logically consistent with the student's previous responses?", _YES_SCALE),
        "tutor_tone": ("Is the tutor's response encouraging, neutral, or offensive?", {1: "Encouraging", 2: "Neutral", 3: "Offensive"}),
        "humanness": ("Does the tutor's response sound natural rather than robotic or artificial?", _YES_SCALE),
    }
)

DEFAULT_DESIRED: Mapping[str, frozenset[int]] = MappingProxyType(
    {
        "mistake_identification": frozenset({1}),
        "mistake_location": frozenset({1}),
        "revealing_answer": frozenset({3}),
        "providing_guidance": frozenset({1}),
        "actionability": frozenset({1}),
        "coherence": frozenset({1}),
        "tutor_tone": frozenset({1, 2}),
        "humanness": frozenset({1}),
    }
)


@dataclass(frozen=True)
class DesiredLabelRubric:
    """Desired label set per dimension; defaults follow the published rubric."""

    desired: Mapping[str, frozenset[int]] = field(default_factory=lambda: dict(DEFAULT_DESIRED))

    def __post_init__(self) -> None:
        missing = [d for d in DIMENSIONS if d not in self.desired]
        unknown = [d for d in self.desired if d not in DIMENSIONS]
        if missing or unknown:
            raise ValueError(f"rubric must cover exactly the 8 dimensions (missing={missing}, unknown={unknown})")
        for dim, labels in self.desired.items():
            if not labels or not set(labels) <= set(LABELS):
                raise ValueError(f"desired labels for {dim} must be a non-empty subset of {LABELS}")
        object.__setattr__(self, "desired", MappingProxyType({d: frozenset(self.desired[d]) for d in DIMENSIONS}))

    @classmethod
    def default(cls) -> "DesiredLabelRubric":
        return cls()

    @classmethod
    def with_overrides(cls, overrides: Mapping[str, Iterable[int]] | None) -> "DesiredLabelRubric":
        desired = dict(DEFAULT_DESIRED)
        for dim, labels in (overrides or {}).items():
            if dim not in DIMENSIONS:
                raise ValueError(f"unknown dimension in rubric override: {dim}")
            desired[dim] = frozenset(int(v) for v in labels)
        return cls(desired)

    def is_desired(self, dimension: str, label: int) -> bool:
        return label in self.desired[dimension]

    def to_dict(self) -> dict[str, list[int]]:
        return {d: sorted(self.desired[d]) for d in DIMENSIONS}


def rubric_text(rubric: DesiredLabelRubric | None = None) -> str:
    """Plain-text rubric block for judge prompts."""
    rubric = rubric or DesiredLabelRubric.default()
    lines = []
    for dim in DIMENSIONS:
        question, scale = DEFINITIONS[dim]
        labels = "; ".join(f"{k}: {v}" for k, v in scale.items())
        lines.append(f"- {dim}: {question} Labels: {labels}.")
    return "\n".join(lines)
