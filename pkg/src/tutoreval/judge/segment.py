"""Deterministic sentence segmentation for tutor feedback.

A sentence ends at ``.``, ``!`` or ``?`` (optionally followed by closing
quotes or brackets) when the next non-space character is an uppercase letter
or a digit. Backtick code spans, fenced or inline, are masked first so they
are never split; because a code span cannot start a sentence, it always
attaches to the sentence before it.
"""
from __future__ import annotations

import re

ABBREVIATIONS = frozenset(
    {"e.g.", "i.e.", "etc.", "vs.", "cf.", "approx.", "resp.", "al.", "mr.", "mrs.", "ms.", "dr."}
)

_FENCE = re.compile(r"```.*?(?:```|\Z)", re.DOTALL)
_INLINE = re.compile(r"`[^`\n]*`")
_BOUNDARY = re.compile(r"[.!?]+[\"')\]]*(?=\s+\S)")
_WS = re.compile(r"\s+")


class SegmentationError(ValueError):
    pass


def _mask_code(text: str) -> str:
    def blank(m: re.Match) -> str:
        return "\0" * len(m.group(0))

    masked = _FENCE.sub(blank, text)
    return _INLINE.sub(blank, masked)


def _ends_with_abbreviation(masked: str, end: int) -> bool:
    start = end
    while start > 0 and not masked[start - 1].isspace():
        start -= 1
    token = masked[start:end].lower().lstrip("(\"'[")
    return token in ABBREVIATIONS


def segment_sentences(text: str) -> list[str]:
    if not text or not text.strip():
        raise SegmentationError("cannot segment empty feedback text")
    masked = _mask_code(text)
    sentences: list[str] = []
    start = 0
    for m in _BOUNDARY.finditer(masked):
        end = m.end()
        nxt = end
        while masked[nxt].isspace():
            nxt += 1
        follower = masked[nxt]
        if not (follower.isupper() or follower.isdigit()):
            continue
        if _ends_with_abbreviation(masked, m.start() + 1):
            continue
        piece = text[start:end].strip()
        if piece:
            sentences.append(piece)
        start = nxt
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def collapse_whitespace(text: str) -> str:
    return _WS.sub(" ", text).strip()
