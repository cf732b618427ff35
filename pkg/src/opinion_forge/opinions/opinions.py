"""Opinion data models for the ASTE and ACOS formulations.

Every annotation that enters the system, gold or predicted, passes through
``canonicalize_annotation`` before it is compared. Two opinions are equal when
their canonical fields are equal; token spans ride along for provenance only.
"""

from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, ClassVar, Iterable, Iterator, Mapping

from opinion_forge.errors import InvalidAnnotation, InvalidTerm


IMPLICIT_SENTINEL = "⊥"


class OpinionTask(StrEnum):
    ASTE = "aste"
    ACOS = "acos"


class SentimentPolarity(StrEnum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"

    @classmethod
    def parse(cls, value: Any) -> "SentimentPolarity":
        if not isinstance(value, str):
            raise InvalidAnnotation(f"sentiment must be a string, got {type(value).__name__}")
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise InvalidAnnotation(f"unknown sentiment {value!r}") from None


class ParseStatus(StrEnum):
    OK = "ok"
    REPAIRED = "repaired"
    FAILED = "failed"


@dataclass(frozen=True, slots=True)
class Sentence:
    id: str
    text: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.id:
            raise ValueError("sentence id must be non-empty")
        if " ".join(self.tokens) != " ".join(self.text.split()):
            raise ValueError(f"tokens of sentence {self.id} do not rejoin to its text")

    @classmethod
    def from_text(cls, id: str, text: str) -> "Sentence":
        tokens = tuple(text.split())
        return cls(id=id, text=" ".join(tokens), tokens=tokens)


@dataclass(frozen=True, slots=True)
class ExplicitTerm:
    surface: str
    # (start, end) token indices, end exclusive
    span: tuple[int, int] | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return self.surface


@dataclass(frozen=True, slots=True)
class ImplicitTerm:
    def __str__(self) -> str:
        return "NULL"


IMPLICIT = ImplicitTerm()

Term = ExplicitTerm | ImplicitTerm


@dataclass(frozen=True, slots=True, order=True)
class AspectCategory:
    entity: str
    attribute: str

    def __post_init__(self):
        for part in (self.entity, self.attribute):
            if not isinstance(part, str) or not part or "#" in part or any(c.isspace() for c in part):
                raise InvalidAnnotation(f"invalid aspect category {self.entity}#{self.attribute}")
        object.__setattr__(self, "entity", self.entity.lower())
        object.__setattr__(self, "attribute", self.attribute.lower())

    @classmethod
    def parse(cls, text: Any) -> "AspectCategory":
        if not isinstance(text, str):
            raise InvalidAnnotation(f"category must be a string, got {type(text).__name__}")
        entity, sep, attribute = text.strip().lower().partition("#")
        if not sep:
            raise InvalidAnnotation(f"category {text!r} is not of the form entity#attribute")
        return cls(entity, attribute)

    def __str__(self) -> str:
        return f"{self.entity}#{self.attribute}"


@dataclass(frozen=True, slots=True)
class OpinionTriple:
    task: ClassVar[OpinionTask] = OpinionTask.ASTE

    aspect: Term
    sentiment: SentimentPolarity
    opinion: Term

    def __post_init__(self):
        if not isinstance(self.aspect, ExplicitTerm) or not isinstance(self.opinion, ExplicitTerm):
            raise InvalidAnnotation("ASTE triples cannot hold implicit terms")


@dataclass(frozen=True, slots=True)
class OpinionQuad:
    task: ClassVar[OpinionTask] = OpinionTask.ACOS

    aspect: Term
    category: AspectCategory
    sentiment: SentimentPolarity
    opinion: Term


Opinion = OpinionTriple | OpinionQuad


def canonicalize_term(term: Term) -> Term:
    """Trim, collapse inner whitespace and lowercase an explicit surface."""
    if isinstance(term, ImplicitTerm):
        return term
    surface = " ".join(term.surface.split()).lower()
    if not surface:
        raise InvalidTerm("explicit term has an empty surface")
    return ExplicitTerm(surface, term.span)


def canonicalize_annotation(opinion: Opinion) -> Opinion:
    if isinstance(opinion, OpinionTriple):
        return OpinionTriple(
            aspect=canonicalize_term(opinion.aspect),
            sentiment=opinion.sentiment,
            opinion=canonicalize_term(opinion.opinion),
        )
    category = opinion.category
    return OpinionQuad(
        aspect=canonicalize_term(opinion.aspect),
        category=AspectCategory(category.entity.lower(), category.attribute.lower()),
        sentiment=opinion.sentiment,
        opinion=canonicalize_term(opinion.opinion),
    )


def _term_value(term: Term) -> str | None:
    return None if isinstance(term, ImplicitTerm) else term.surface


def opinion_to_dict(opinion: Opinion) -> dict[str, str | None]:
    if isinstance(opinion, OpinionTriple):
        return {
            "aspect": _term_value(opinion.aspect),
            "sentiment": str(opinion.sentiment),
            "opinion": _term_value(opinion.opinion),
        }
    return {
        "aspect": _term_value(opinion.aspect),
        "category": str(opinion.category),
        "sentiment": str(opinion.sentiment),
        "opinion": _term_value(opinion.opinion),
    }


def _term_from_value(task: OpinionTask, value: Any, name: str) -> Term:
    if value is None:
        if task is OpinionTask.ASTE:
            raise InvalidAnnotation(f"'{name}' cannot be null in ASTE")
        return IMPLICIT
    if not isinstance(value, str):
        raise InvalidAnnotation(f"'{name}' must be a string, got {type(value).__name__}")
    return canonicalize_term(ExplicitTerm(value))


def opinion_from_dict(task: OpinionTask, data: Mapping[str, Any]) -> Opinion:
    """Build a canonical opinion from its serialized form.

    Raises InvalidAnnotation (or InvalidTerm) naming the first offending field.
    """
    required = ("aspect", "sentiment", "opinion") if task is OpinionTask.ASTE else (
        "aspect", "category", "sentiment", "opinion")
    for name in required:
        if name not in data:
            raise InvalidAnnotation(f"missing field '{name}'")

    aspect = _term_from_value(task, data["aspect"], "aspect")
    opinion = _term_from_value(task, data["opinion"], "opinion")
    sentiment = SentimentPolarity.parse(data["sentiment"])
    if task is OpinionTask.ASTE:
        return OpinionTriple(aspect, sentiment, opinion)
    return OpinionQuad(aspect, AspectCategory.parse(data["category"]), sentiment, opinion)


def sort_key(opinion: Opinion) -> tuple[str, ...]:
    return tuple(value or "" for value in opinion_to_dict(opinion).values())


@dataclass(frozen=True, slots=True)
class AnnotationSet:
    """The set of opinions expressed in one sentence, canonical and deduplicated."""

    task: OpinionTask
    opinions: frozenset[Opinion] = frozenset()

    def __post_init__(self):
        opinions = frozenset(canonicalize_annotation(o) for o in self.opinions)
        for opinion in opinions:
            if opinion.task is not self.task:
                raise InvalidAnnotation(
                    f"{type(opinion).__name__} does not belong to a {self.task.upper()} set"
                )
        object.__setattr__(self, "opinions", opinions)

    @classmethod
    def empty(cls, task: OpinionTask) -> "AnnotationSet":
        return cls(task, frozenset())

    @classmethod
    def from_json(cls, task: OpinionTask, items: Iterable[Mapping[str, Any]]) -> "AnnotationSet":
        return cls(task, frozenset(opinion_from_dict(task, item) for item in items))

    def __len__(self) -> int:
        return len(self.opinions)

    def __iter__(self) -> Iterator[Opinion]:
        return iter(self.sorted())

    def __contains__(self, opinion: object) -> bool:
        return opinion in self.opinions

    def sorted(self) -> list[Opinion]:
        return sorted(self.opinions, key=sort_key)

    def to_json(self) -> list[dict[str, str | None]]:
        return [opinion_to_dict(o) for o in self.sorted()]


@dataclass(frozen=True, slots=True)
class AnnotationRecord:
    """One annotator's opinion set for one sentence, with provenance."""

    sentence_id: str
    annotator_id: str
    annotations: AnnotationSet
    raw_output: str = ""
    prompt_hash: str = ""
    parse_status: ParseStatus = ParseStatus.OK
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.parse_status is ParseStatus.FAILED and len(self.annotations):
            raise InvalidAnnotation("a failed record cannot carry annotations")

    @property
    def task(self) -> OpinionTask:
        return self.annotations.task

    def to_dict(self) -> dict[str, Any]:
        return {
            "sentence_id": self.sentence_id,
            "annotator_id": self.annotator_id,
            "task": str(self.task),
            "annotations": self.annotations.to_json(),
            "raw_output": self.raw_output,
            "prompt_hash": self.prompt_hash,
            "parse_status": str(self.parse_status),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AnnotationRecord":
        task = OpinionTask(data["task"])
        return cls(
            sentence_id=data["sentence_id"],
            annotator_id=data["annotator_id"],
            annotations=AnnotationSet.from_json(task, data["annotations"]),
            raw_output=data.get("raw_output", ""),
            prompt_hash=data.get("prompt_hash", ""),
            parse_status=ParseStatus(data.get("parse_status", "ok")),
            notes=tuple(data.get("notes", ())),
        )
