import asyncio
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

from loguru import logger

from opinion_forge.corpora import DevPartition, Entry
from opinion_forge.errors import IntegrityError, SelectionError
from opinion_forge.metrics import Projection, annotations_by_id, exact_match_prf
from opinion_forge.opinions import AnnotationRecord, OpinionTask, ParseStatus, Sentence
from opinion_forge.prompts.prompts import ICL_COUNTS, PromptProgram, sample_demos


class SupportsAnnotation(Protocol):
    """Anything that can annotate sentences with a given prompt program."""

    annotator_id: str
    task: OpinionTask

    def program_for(self, demos: Sequence[Entry]) -> PromptProgram: ...

    async def annotate(self, program: PromptProgram, sentences: Sequence[Sentence]) -> list[AnnotationRecord]: ...


@dataclass
class IclSelectionReport:
    annotator_id: str
    scores: dict[int, float]
    chosen_k: int
    seed: int
    failed: dict[int, int] = field(default_factory=dict)
    # records of every k on the eval half; not serialized
    records: dict[int, list[AnnotationRecord]] = field(default_factory=dict, repr=False, compare=False)

    @property
    def best_f1(self) -> float:
        return self.scores[self.chosen_k]

    def to_dict(self) -> dict[str, Any]:
        return {
            "annotator_id": self.annotator_id,
            "seed": self.seed,
            "chosen_k": self.chosen_k,
            "rows": [
                {"k": k, "f1": self.scores[k], "failed": self.failed.get(k, 0)}
                for k in sorted(self.scores)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "IclSelectionReport":
        return cls(
            annotator_id=data["annotator_id"],
            scores={row["k"]: row["f1"] for row in data["rows"]},
            chosen_k=data["chosen_k"],
            seed=data["seed"],
            failed={row["k"]: row.get("failed", 0) for row in data["rows"]},
        )


def choose_k(scores: dict[int, float]) -> int:
    """Best F1; ties go to the smaller k."""
    return min(scores, key=lambda k: (-scores[k], k))


async def select_icl_count(
    annotator: SupportsAnnotation,
    partition: DevPartition,
    ks: Sequence[int] = ICL_COUNTS,
    *,
    seed: int | None = None,
) -> IclSelectionReport:
    """Score one prompt program per k on the eval half and keep the best k."""
    seed = partition.seed if seed is None else seed
    eval_ids = set(partition.eval_ids)
    gold = {e.sentence.id: e.gold for e in partition.eval_half}
    sentences = [e.sentence for e in partition.eval_half]

    programs = {}
    for k in ks:
        program = annotator.program_for(sample_demos(partition.icl_pool, k, seed))
        if eval_ids & set(program.demo_ids):
            raise IntegrityError(f"demos for k={k} leak into the evaluation half")
        programs[k] = program

    runs = await asyncio.gather(*(annotator.annotate(programs[k], sentences) for k in ks))

    scores, failed, records = {}, {}, {}
    for k, run in zip(ks, runs):
        records[k] = run
        failed[k] = sum(r.parse_status is ParseStatus.FAILED for r in run)
        scores[k] = exact_match_prf(gold, annotations_by_id(run), Projection.JOINT).f1
        logger.info(f"{annotator.annotator_id}: k={k} joint F1={scores[k]:.4f} ({failed[k]} failed)")

    if sentences and all(failed[k] == len(sentences) for k in ks):
        raise SelectionError(f"{annotator.annotator_id}: no output could be parsed for any k in {list(ks)}")

    chosen = choose_k(scores)
    logger.info(f"{annotator.annotator_id}: chose k={chosen}")
    return IclSelectionReport(annotator.annotator_id, scores, chosen, seed, failed, records)
