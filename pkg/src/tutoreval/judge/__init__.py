"""Sentence segmentation and LLM-judge annotation with a reply cache."""
from tutoreval.judge.agreement import AgreementError, AgreementReport, agreement_report, load_label_file
from tutoreval.judge.annotate import (
    AnnotationError,
    EngagementAnnotation,
    PedagogyAnnotation,
    PromptTemplate,
    SentenceAttribution,
    annotate_engagement,
    annotate_pedagogy,
    parse_engagement_reply,
    parse_pedagogy_reply,
)
from tutoreval.judge.backends import (
    BackendError,
    BackendUnavailableError,
    FixtureBackend,
    JudgeBackend,
    JudgeError,
    JudgeRequest,
    RemoteBackend,
)
from tutoreval.judge.cache import ReplyCache, cache_key
from tutoreval.judge.segment import SegmentationError, segment_sentences

__all__ = [
    "AgreementError",
    "AgreementReport",
    "AnnotationError",
    "BackendError",
    "BackendUnavailableError",
    "EngagementAnnotation",
    "FixtureBackend",
    "JudgeBackend",
    "JudgeError",
    "JudgeRequest",
    "PedagogyAnnotation",
    "PromptTemplate",
    "RemoteBackend",
    "ReplyCache",
    "SegmentationError",
    "SentenceAttribution",
    "agreement_report",
    "annotate_engagement",
    "annotate_pedagogy",
    "cache_key",
    "load_label_file",
    "parse_engagement_reply",
    "parse_pedagogy_reply",
    "segment_sentences",
]
