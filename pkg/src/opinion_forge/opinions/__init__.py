"""Opinion data models and canonicalization."""

from .opinions import (
    IMPLICIT,
    IMPLICIT_SENTINEL,
    AnnotationRecord,
    AnnotationSet,
    AspectCategory,
    ExplicitTerm,
    ImplicitTerm,
    Opinion,
    OpinionQuad,
    OpinionTask,
    OpinionTriple,
    ParseStatus,
    Sentence,
    SentimentPolarity,
    Term,
    canonicalize_annotation,
    canonicalize_term,
    opinion_from_dict,
    opinion_to_dict,
    sort_key,
)

__all__ = [
    "IMPLICIT",
    "IMPLICIT_SENTINEL",
    "AnnotationRecord",
    "AnnotationSet",
    "AspectCategory",
    "ExplicitTerm",
    "ImplicitTerm",
    "Opinion",
    "OpinionQuad",
    "OpinionTask",
    "OpinionTriple",
    "ParseStatus",
    "Sentence",
    "SentimentPolarity",
    "Term",
    "canonicalize_annotation",
    "canonicalize_term",
    "opinion_from_dict",
    "opinion_to_dict",
    "sort_key",
]
