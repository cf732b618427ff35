"""Inter-annotator agreement with nominal Krippendorff's alpha.

Span elements are unitized per token: every (sentence, token) pair is a unit
and each annotator labels it from its spans. Aspect categories are compared per
sentence.
"""

import json
from dataclasses import asdict, dataclass
from enum import StrEnum
from typing import Hashable, Iterable, Sequence

import krippendorff
import numpy as np

from opinion_forge.errors import IntegrityError, UndefinedAgreement, UsageError
from opinion_forge.opinions import (
    AnnotationRecord,
    AnnotationSet,
    ExplicitTerm,
    OpinionQuad,
    OpinionTask,
    Sentence,
)


OUTSIDE = "O"
INSIDE = "I"


class AgreementElement(StrEnum):
    AT = "at"
    OP = "op"
    AC = "ac"
    AT_S = "at&s"
    OP_S = "op&s"


TOKEN_ELEMENTS = (AgreementElement.AT, AgreementElement.OP, AgreementElement.AT_S, AgreementElement.OP_S)


def elements_for(task: OpinionTask) -> list[AgreementElement]:
    if task is OpinionTask.ACOS:
        return list(AgreementElement)
    return list(TOKEN_ELEMENTS)


@dataclass(frozen=True, slots=True)
class TokenLabeling:
    labels: tuple[str, ...]
    unlocatable: int = 0


def locate(term: ExplicitTerm, tokens: Sequence[str]) -> tuple[int, int] | None:
    """Token span of a term: its stored span if it still matches, else the first
    case-insensitive token subsequence match."""
    lowered = [t.lower() for t in tokens]
    needle = term.surface.lower().split()
    if term.span is not None:
        start, end = term.span
        if 0 <= start < end <= len(tokens) and lowered[start:end] == needle:
            return start, end
    for start in range(len(lowered) - len(needle) + 1):
        if lowered[start:start + len(needle)] == needle:
            return start, start + len(needle)
    return None


def token_labels(sentence: Sentence, annotations: AnnotationSet, element: AgreementElement) -> TokenLabeling:
    element = AgreementElement(element)
    if element not in TOKEN_ELEMENTS:
        raise UsageError(f"{element} is not a span element")

    labels = [OUTSIDE] * len(sentence.tokens)
    unlocatable = 0
    for opinion in annotations.sorted():
        term = opinion.aspect if element in (AgreementElement.AT, AgreementElement.AT_S) else opinion.opinion
        if not isinstance(term, ExplicitTerm):
            continue
        span = locate(term, sentence.tokens)
        if span is None:
            unlocatable += 1
            continue
        label = INSIDE if element in (AgreementElement.AT, AgreementElement.OP) else str(opinion.sentiment)
        for i in range(*span):
            # first opinion in canonical order wins
            if labels[i] == OUTSIDE:
                labels[i] = label
    return TokenLabeling(tuple(labels), unlocatable)


def category_label(annotations: AnnotationSet) -> str:
    return json.dumps(sorted(str(o.category) for o in annotations.opinions if isinstance(o, OpinionQuad)))


def value_counts(units: Iterable[Sequence[tuple[Hashable, Hashable]]]) -> tuple[np.ndarray, list[Hashable]]:
    """Units-by-labels count matrix over the units that carry at least two labels."""
    pairable = [[label for _, label in unit] for unit in units if len(unit) >= 2]
    if not pairable:
        raise UndefinedAgreement("no unit carries two or more labels")

    index: dict[Hashable, int] = {}
    for unit in pairable:
        for label in unit:
            index.setdefault(label, len(index))

    counts = np.zeros((len(pairable), len(index)))
    for row, unit in enumerate(pairable):
        for label in unit:
            counts[row, index[label]] += 1
    return counts, list(index)


def coincidence_matrix(units: Iterable[Sequence[tuple[Hashable, Hashable]]]) -> np.ndarray:
    counts, _ = value_counts(units)
    weighted = counts / (counts.sum(axis=1) - 1)[:, None]
    return weighted.T @ counts - np.diag(weighted.sum(axis=0))


def krippendorff_alpha(units: Iterable[Sequence[tuple[Hashable, Hashable]]]) -> float:
    """Nominal Krippendorff's alpha.

    Args:
        units: for each unit, the (coder, label) pairs assigned to it. Units with
            fewer than two labels are not pairable and are skipped.

    Returns 1.0 when the pairable units use a single label.
    """
    counts, labels = value_counts(units)
    if len(labels) < 2:
        return 1.0
    return float(krippendorff.alpha(value_counts=counts, level_of_measurement="nominal"))


@dataclass(frozen=True, slots=True)
class AgreementRow:
    dataset: str
    element: str
    alpha: float
    n_units: int
    n_coders: int
    unlocatable: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def agreement_suite(
    runs: Sequence[Sequence[AnnotationRecord]],
    sentences: Sequence[Sentence],
    task: OpinionTask,
    elements: Iterable[AgreementElement] | None = None,
    *,
    dataset: str = "",
) -> list[AgreementRow]:
    if len(runs) < 2:
        raise UndefinedAgreement(f"agreement needs at least two annotators, got {len(runs)}")

    ids = {s.id for s in sentences}
    by_coder: list[tuple[str, dict[str, AnnotationSet]]] = []
    for run in runs:
        if {r.sentence_id for r in run} != ids:
            raise IntegrityError("every annotator run must cover the split exactly")
        coder = run[0].annotator_id if run else f"coder-{len(by_coder)}"
        by_coder.append((coder, {r.sentence_id: r.annotations for r in run}))

    rows = []
    for element in elements or elements_for(task):
        element = AgreementElement(element)
        units: list[list[tuple[str, str]]] = []
        unlocatable = 0
        for sentence in sentences:
            if element is AgreementElement.AC:
                units.append([(coder, category_label(sets[sentence.id])) for coder, sets in by_coder])
                continue
            labelings = []
            for coder, sets in by_coder:
                labeling = token_labels(sentence, sets[sentence.id], element)
                unlocatable += labeling.unlocatable
                labelings.append((coder, labeling.labels))
            for i in range(len(sentence.tokens)):
                units.append([(coder, labels[i]) for coder, labels in labelings])
        rows.append(AgreementRow(
            dataset=dataset,
            element=str(element),
            alpha=krippendorff_alpha(units),
            n_units=len(units),
            n_coders=len(by_coder),
            unlocatable=unlocatable,
        ))
    return rows
