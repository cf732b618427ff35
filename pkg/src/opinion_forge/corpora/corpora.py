"""Readers and writers for the upstream ASTE and ACOS releases.

ASTE lines look like ``sentence####[([a_idx, ...], [o_idx, ...], 'POS'), ...]``;
ACOS lines are tab separated, ``sentence\\tA_START,A_END CATEGORY POLARITY O_START,O_END``
per quad, with ``-1,-1`` marking an implicit term. Sentences are pre-tokenized
upstream, so tokens are the whitespace split of the left part.
"""

import ast
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np
from loguru import logger

from opinion_forge.errors import (
    InvalidAnnotation,
    LabelError,
    ParseError,
    SpanError,
    TooSmall,
)
from opinion_forge.opinions import (
    IMPLICIT,
    AnnotationSet,
    AspectCategory,
    ExplicitTerm,
    ImplicitTerm,
    OpinionQuad,
    OpinionTask,
    OpinionTriple,
    Sentence,
    SentimentPolarity,
    Term,
)


ASTE_SEPARATOR = "####"

ASTE_TAGS = {
    "POS": SentimentPolarity.POSITIVE,
    "NEG": SentimentPolarity.NEGATIVE,
    "NEU": SentimentPolarity.NEUTRAL,
}

ACOS_POLARITIES = {
    0: SentimentPolarity.NEGATIVE,
    1: SentimentPolarity.NEUTRAL,
    2: SentimentPolarity.POSITIVE,
}

# (train, dev, test) sentence counts of the public releases
DATASET_BREAKDOWN: dict[tuple[OpinionTask, str], tuple[int, int, int]] = {
    (OpinionTask.ASTE, "lap14"): (906, 219, 328),
    (OpinionTask.ASTE, "res14"): (1126, 310, 492),
    (OpinionTask.ASTE, "res15"): (607, 148, 322),
    (OpinionTask.ASTE, "res16"): (857, 210, 326),
    (OpinionTask.ACOS, "laptop"): (2934, 326, 816),
    (OpinionTask.ACOS, "restaurant"): (1530, 171, 583),
}


class SplitName(StrEnum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


@dataclass(frozen=True, slots=True)
class Entry:
    sentence: Sentence
    gold: AnnotationSet


@dataclass(frozen=True, slots=True)
class DatasetSplit:
    name: SplitName
    task: OpinionTask
    domain: str
    entries: tuple[Entry, ...]

    def __post_init__(self):
        ids = [e.sentence.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate sentence ids in {self.domain}/{self.name}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def sentences(self) -> list[Sentence]:
        return [e.sentence for e in self.entries]

    def gold_by_id(self) -> dict[str, AnnotationSet]:
        return {e.sentence.id: e.gold for e in self.entries}


@dataclass(frozen=True, slots=True)
class DevPartition:
    icl_pool: tuple[Entry, ...]
    eval_half: tuple[Entry, ...]
    seed: int = field(default=0)

    @property
    def pool_ids(self) -> list[str]:
        return [e.sentence.id for e in self.icl_pool]

    @property
    def eval_ids(self) -> list[str]:
        return [e.sentence.id for e in self.eval_half]


def _span_term(tokens: tuple[str, ...], start: int, end: int, line_no: int | None) -> ExplicitTerm:
    if not 0 <= start < end <= len(tokens):
        raise SpanError(f"span {start},{end} outside 0..{len(tokens)}", line_no)
    return ExplicitTerm(" ".join(tokens[start:end]), (start, end))


def _contiguous(indices, tokens: tuple[str, ...], line_no: int | None) -> ExplicitTerm:
    if not isinstance(indices, list) or not indices or not all(isinstance(i, int) for i in indices):
        raise ParseError(f"expected a non-empty list of token indices, got {indices!r}", line_no)
    if indices != list(range(indices[0], indices[0] + len(indices))):
        raise SpanError(f"token indices {indices} are not contiguous and ascending", line_no)
    return _span_term(tokens, indices[0], indices[-1] + 1, line_no)


def parse_aste_line(line: str, id: str, line_no: int | None = None) -> tuple[Sentence, AnnotationSet]:
    if line.count(ASTE_SEPARATOR) != 1:
        raise ParseError(f"expected exactly one '{ASTE_SEPARATOR}' separator", line_no)
    text, triples_literal = line.split(ASTE_SEPARATOR)
    sentence = Sentence.from_text(id, text)

    try:
        raw_triples = ast.literal_eval(triples_literal.strip())
    except (ValueError, SyntaxError, RecursionError, MemoryError) as e:
        raise ParseError(f"malformed triple list: {type(e).__name__} {e}", line_no) from None
    if not isinstance(raw_triples, list):
        raise ParseError("triple list must be a bracketed list", line_no)

    triples = []
    for raw in raw_triples:
        if not isinstance(raw, tuple) or len(raw) != 3:
            raise ParseError(f"expected ([aspect], [opinion], 'TAG'), got {raw!r}", line_no)
        aspect_idx, opinion_idx, tag = raw
        if not isinstance(tag, str) or tag not in ASTE_TAGS:
            raise LabelError(f"unknown sentiment tag {tag!r}", line_no)
        triples.append(OpinionTriple(
            aspect=_contiguous(aspect_idx, sentence.tokens, line_no),
            sentiment=ASTE_TAGS[tag],
            opinion=_contiguous(opinion_idx, sentence.tokens, line_no),
        ))
    return sentence, AnnotationSet(OpinionTask.ASTE, frozenset(triples))


def _parse_acos_span(field_: str, tokens: tuple[str, ...], line_no: int | None) -> Term:
    try:
        start, end = (int(x) for x in field_.split(","))
    except ValueError:
        raise ParseError(f"malformed span {field_!r}", line_no) from None
    if (start, end) == (-1, -1):
        return IMPLICIT
    return _span_term(tokens, start, end, line_no)


def parse_acos_line(line: str, id: str, line_no: int | None = None) -> tuple[Sentence, AnnotationSet]:
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) < 2 or not all(f.strip() for f in fields[1:]):
        raise ParseError("expected a sentence followed by at least one quad field", line_no)
    sentence = Sentence.from_text(id, fields[0])

    quads = []
    for quad_field in fields[1:]:
        parts = quad_field.split()
        if len(parts) != 4:
            raise ParseError(f"quad field {quad_field!r} must have 4 parts", line_no)
        aspect_span, category, polarity, opinion_span = parts
        try:
            sentiment = ACOS_POLARITIES[int(polarity)]
        except (ValueError, KeyError):
            raise LabelError(f"polarity {polarity!r} outside {{0,1,2}}", line_no) from None
        try:
            category = AspectCategory.parse(category)
        except InvalidAnnotation as e:
            raise ParseError(str(e), line_no) from None
        quads.append(OpinionQuad(
            aspect=_parse_acos_span(aspect_span, sentence.tokens, line_no),
            category=category,
            sentiment=sentiment,
            opinion=_parse_acos_span(opinion_span, sentence.tokens, line_no),
        ))
    return sentence, AnnotationSet(OpinionTask.ACOS, frozenset(quads))


def _require_span(term: Term) -> tuple[int, int]:
    if not isinstance(term, ExplicitTerm) or term.span is None:
        raise ValueError(f"term {term} carries no token span and cannot be written upstream")
    return term.span


def format_aste_line(sentence: Sentence, gold: AnnotationSet) -> str:
    tag_of = {v: k for k, v in ASTE_TAGS.items()}
    triples = []
    for triple in gold.sorted():
        a_start, a_end = _require_span(triple.aspect)
        o_start, o_end = _require_span(triple.opinion)
        triples.append((list(range(a_start, a_end)), list(range(o_start, o_end)), tag_of[triple.sentiment]))
    return f"{sentence.text}{ASTE_SEPARATOR}{triples!r}"


def format_acos_line(sentence: Sentence, gold: AnnotationSet) -> str:
    polarity_of = {v: k for k, v in ACOS_POLARITIES.items()}

    def span(term: Term) -> str:
        if isinstance(term, ImplicitTerm):
            return "-1,-1"
        start, end = _require_span(term)
        return f"{start},{end}"

    quads = [
        f"{span(q.aspect)} {q.category} {polarity_of[q.sentiment]} {span(q.opinion)}"
        for q in gold.sorted()
    ]
    if not quads:
        raise ValueError("ACOS lines need at least one quad")
    return "\t".join([sentence.text, *quads])


def load_split(path: Path, task: OpinionTask, domain: str, name: SplitName | str) -> DatasetSplit:
    """Parse a whole upstream file; ids are ``{domain}.{split}.{line:05d}``."""
    path = Path(path)
    name = SplitName(name)
    parse_line = parse_aste_line if task is OpinionTask.ASTE else parse_acos_line

    entries = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                sentence, gold = parse_line(line.rstrip("\r\n"), f"{domain}.{name}.{line_no:05d}", line_no)
            except (ParseError, SpanError, LabelError) as e:
                e.path = path
                raise
            entries.append(Entry(sentence, gold))

    known = DATASET_BREAKDOWN.get((task, domain))
    expected = known and known[list(SplitName).index(name)]
    if expected and expected != len(entries):
        logger.warning(f"{path}: {len(entries)} entries, the public {domain} {name} split has {expected}")
    logger.debug(f"loaded {len(entries)} {task} entries from {path}")
    return DatasetSplit(name=name, task=task, domain=domain, entries=tuple(entries))


def partition_dev(dev: list[Entry] | tuple[Entry, ...], seed: int) -> DevPartition:
    """Split the dev entries into an ICL pool and a prompt-evaluation half.

    The pool gets floor(n/2) entries; with an odd n the evaluation half holds the extra one.
    """
    if len(dev) < 2:
        raise TooSmall(f"need at least 2 dev entries to partition, got {len(dev)}")
    order = np.random.default_rng(seed).permutation(len(dev))
    shuffled = [dev[i] for i in order]
    cut = len(dev) // 2
    return DevPartition(icl_pool=tuple(shuffled[:cut]), eval_half=tuple(shuffled[cut:]), seed=seed)
