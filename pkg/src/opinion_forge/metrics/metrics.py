"""Exact-match scoring of opinion annotations against gold.

Scores are micro-averaged over a split: matched, gold and predicted counts are
summed over sentences before precision and recall are taken.
"""

from dataclasses import asdict, dataclass
from enum import StrEnum
from typing import Callable, Iterable, Mapping

from opinion_forge.errors import IntegrityError, UsageError
from opinion_forge.opinions import (
    IMPLICIT_SENTINEL,
    AnnotationRecord,
    AnnotationSet,
    ImplicitTerm,
    Opinion,
    OpinionQuad,
    OpinionTask,
    Term,
)


class Projection(StrEnum):
    S = "s"
    AT = "at"
    OP = "op"
    E = "E"
    A = "A"
    AC = "ac"
    S_AT = "s&at"
    S_OP = "s&op"
    AT_OP = "at&op"
    S_AC = "s&ac"
    AT_AC = "at&ac"
    OP_AC = "op&ac"
    AT_S_OP = "at&s&op"
    JOINT = "joint"

    @property
    def fields(self) -> tuple[str, ...]:
        return tuple(self.value.split("&"))


ACOS_ONLY = frozenset({Projection.E, Projection.A, Projection.AC, Projection.S_AC, Projection.AT_AC, Projection.OP_AC})


def projections_for(task: OpinionTask) -> list[Projection]:
    if task is OpinionTask.ACOS:
        return list(Projection)
    return [p for p in Projection if p not in ACOS_ONLY]


def _term(term: Term) -> str:
    return IMPLICIT_SENTINEL if isinstance(term, ImplicitTerm) else term.surface


def _category(opinion: Opinion):
    if not isinstance(opinion, OpinionQuad):
        raise UsageError("category projections only apply to ACOS quads")
    return opinion.category


_FIELDS: dict[str, Callable[[Opinion], str]] = {
    "s": lambda o: str(o.sentiment),
    "at": lambda o: _term(o.aspect),
    "op": lambda o: _term(o.opinion),
    "E": lambda o: _category(o).entity,
    "A": lambda o: _category(o).attribute,
    "ac": lambda o: str(_category(o)),
}


def project(opinion: Opinion, projection: Projection) -> tuple[str, ...]:
    """Ordered tuple of the canonical values named by the projection."""
    projection = Projection(projection)
    if projection in ACOS_ONLY and not isinstance(opinion, OpinionQuad):
        raise UsageError(f"projection {projection} is only valid for ACOS")
    if projection is Projection.JOINT:
        names = ("at", "ac", "s", "op") if isinstance(opinion, OpinionQuad) else ("at", "s", "op")
    else:
        names = projection.fields
    return tuple(_FIELDS[name](opinion) for name in names)


def project_set(annotations: AnnotationSet, projection: Projection) -> set[tuple[str, ...]]:
    return {project(o, projection) for o in annotations.opinions}


@dataclass(frozen=True, slots=True)
class MetricRow:
    dataset: str
    annotator: str
    projection: str
    precision: float
    recall: float
    f1: float
    n_gold: int
    n_pred: int
    n_matched: int

    def as_dict(self) -> dict:
        return asdict(self)


def prf(n_matched: int, n_gold: int, n_pred: int) -> tuple[float, float, float]:
    precision = n_matched / n_pred if n_pred else 0.0
    recall = n_matched / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def annotations_by_id(records: Iterable[AnnotationRecord]) -> dict[str, AnnotationSet]:
    return {r.sentence_id: r.annotations for r in records}


def _check_coverage(gold: Mapping[str, AnnotationSet], pred: Mapping[str, AnnotationSet]) -> None:
    if gold.keys() != pred.keys():
        missing = sorted(gold.keys() - pred.keys())
        extra = sorted(pred.keys() - gold.keys())
        raise IntegrityError(f"sentence ids differ: missing {missing[:5]}, unexpected {extra[:5]}")


def exact_match_prf(
    gold: Mapping[str, AnnotationSet],
    pred: Mapping[str, AnnotationSet],
    projection: Projection = Projection.JOINT,
    *,
    dataset: str = "",
    annotator: str = "",
) -> MetricRow:
    _check_coverage(gold, pred)
    n_gold = n_pred = n_matched = 0
    for sentence_id, gold_set in gold.items():
        gold_proj = project_set(gold_set, projection)
        pred_proj = project_set(pred[sentence_id], projection)
        n_gold += len(gold_proj)
        n_pred += len(pred_proj)
        n_matched += len(gold_proj & pred_proj)
    precision, recall, f1 = prf(n_matched, n_gold, n_pred)
    return MetricRow(dataset, annotator, str(Projection(projection)), precision, recall, f1, n_gold, n_pred, n_matched)


def element_report(
    gold: Mapping[str, AnnotationSet],
    pred: Mapping[str, AnnotationSet],
    task: OpinionTask,
    projections: Iterable[Projection] | None = None,
    *,
    dataset: str = "",
    annotator: str = "",
) -> list[MetricRow]:
    return [
        exact_match_prf(gold, pred, p, dataset=dataset, annotator=annotator)
        for p in (projections or projections_for(task))
    ]


def error_cases(
    gold: Mapping[str, AnnotationSet],
    pred: Mapping[str, AnnotationSet],
    task: OpinionTask,
) -> list[dict]:
    """Sentences whose joint prediction fails, with the element projections that still agree."""
    _check_coverage(gold, pred)
    partial = [p for p in projections_for(task) if p not in (Projection.JOINT, Projection.AT_S_OP)]
    cases = []
    for sentence_id in sorted(gold):
        gold_set, pred_set = gold[sentence_id], pred[sentence_id]
        if gold_set == pred_set:
            continue
        cases.append({
            "sentence_id": sentence_id,
            "gold": gold_set.to_json(),
            "pred": pred_set.to_json(),
            "matching_projections": [
                str(p) for p in partial
                if project_set(gold_set, p) and project_set(gold_set, p) == project_set(pred_set, p)
            ],
        })
    return cases
