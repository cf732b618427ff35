"""Combining k annotators' opinion sets into one final set.

The LLM adjudicator (the best-ranked annotator's model) is the primary method;
majority voting is the deterministic baseline and the adjudicator's fallback.
"""

import asyncio
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import StrEnum
from pathlib import Path
from typing import Mapping, Sequence

from loguru import logger

from opinion_forge.adjudication.prompts import build_adjudication_program, render_adjudication_prompt
from opinion_forge.annotators import request_annotations
from opinion_forge.corpora import Entry, write_run
from opinion_forge.errors import IntegrityError, UsageError
from opinion_forge.gateway import ChatParams, Gateway
from opinion_forge.opinions import AnnotationRecord, AnnotationSet, OpinionTask, ParseStatus, Sentence
from opinion_forge.prompts import PromptProgram
from opinion_forge.utils import canonical_json, sha256_text


FALLBACK_NOTE = "fallback:majority"
NOVEL_PREFIX = "novel:"


class AdjudicationMode(StrEnum):
    LLM = "llm"
    MAJORITY = "majority"


def adjudicator_id(model: str | None, mode: AdjudicationMode | str) -> str:
    return f"adjudicator:{model or 'none'}:{AdjudicationMode(mode)}"


def _single_task(records: Sequence[AnnotationRecord]) -> OpinionTask:
    tasks = {r.task for r in records}
    if len(tasks) != 1:
        raise IntegrityError(f"records mix tasks {sorted(tasks)}")
    return tasks.pop()


def adjudicate_majority(records: Sequence[AnnotationRecord], threshold: int | None = None) -> AnnotationSet:
    """Keep every opinion proposed by at least ``threshold`` (default ceil(k/2)) annotators."""
    if not records:
        raise ValueError("majority adjudication needs at least one record")
    task = _single_task(records)
    threshold = math.ceil(len(records) / 2) if threshold is None else threshold
    votes = Counter(opinion for r in records for opinion in r.annotations.opinions)
    return AnnotationSet(task, frozenset(o for o, n in votes.items() if n >= threshold))


def candidates_hash(records: Sequence[AnnotationRecord]) -> str:
    """Order-independent digest of the candidate sets."""
    return sha256_text(canonical_json(sorted(canonical_json(r.annotations.to_json()) for r in records)))


@dataclass
class LlmAdjudicator:
    task: OpinionTask
    params: ChatParams
    gateway: Gateway
    program: PromptProgram | None = None
    # candidate records per sentence id, used when the adjudicator is scored on the eval half
    candidates: Mapping[str, Sequence[AnnotationRecord]] = field(default_factory=dict)
    # candidate lists shown in each demonstration
    n_annotators: int = 3

    @property
    def annotator_id(self) -> str:
        return adjudicator_id(self.params.model, AdjudicationMode.LLM)

    def program_for(self, demos: Sequence[Entry]) -> PromptProgram:
        return build_adjudication_program(self.task, demos, self.n_annotators)

    async def adjudicate(
        self,
        sentence: Sentence,
        records: Sequence[AnnotationRecord],
        program: PromptProgram | None = None,
    ) -> AnnotationRecord:
        if len(records) < 2:
            raise UsageError(f"LLM adjudication needs at least two annotators, got {len(records)}")
        program = program or self.program or self.program_for(())
        rendered = render_adjudication_prompt(program, sentence, [r.annotations for r in records])
        record = await request_annotations(
            self.gateway,
            self.params,
            rendered.messages,
            self.task,
            sentence_id=sentence.id,
            annotator_id=self.annotator_id,
            prompt_hash=rendered.prompt_hash,
        )

        if record.parse_status is ParseStatus.FAILED:
            logger.warning(f"{self.annotator_id}: falling back to majority vote for {sentence.id}")
            return replace(
                record,
                annotations=adjudicate_majority(records),
                parse_status=ParseStatus.REPAIRED,
                notes=(*record.notes, FALLBACK_NOTE),
            )

        proposed = frozenset().union(*(r.annotations.opinions for r in records))
        novel = record.annotations.opinions - proposed
        if novel:
            logger.warning(f"{self.annotator_id}: {len(novel)} opinions for {sentence.id} were proposed by no annotator")
            record = replace(record, notes=(*record.notes, f"{NOVEL_PREFIX}{len(novel)}"))
        return record

    async def annotate(self, program: PromptProgram, sentences: Sequence[Sentence]) -> list[AnnotationRecord]:
        missing = [s.id for s in sentences if s.id not in self.candidates]
        if missing:
            raise IntegrityError(f"no candidate annotations for {missing[:5]}")
        records = await asyncio.gather(*(self.adjudicate(s, self.candidates[s.id], program) for s in sentences))
        return sorted(records, key=lambda r: r.sentence_id)


async def adjudicate_llm(
    sentence: Sentence,
    records: Sequence[AnnotationRecord],
    adjudicator: LlmAdjudicator,
) -> AnnotationRecord:
    return await adjudicator.adjudicate(sentence, records)


def group_by_sentence(
    entries: Sequence[Entry],
    runs: Sequence[Sequence[AnnotationRecord]],
) -> dict[str, list[AnnotationRecord]]:
    """Candidate records per sentence, in run order; every run must cover the split exactly."""
    ids = {e.sentence.id for e in entries}
    grouped: dict[str, list[AnnotationRecord]] = {sid: [] for sid in ids}
    for i, run in enumerate(runs):
        run_ids = [r.sentence_id for r in run]
        if set(run_ids) != ids or len(run_ids) != len(ids):
            raise IntegrityError(f"run {i} does not cover the split: {len(run_ids)} records for {len(ids)} sentences")
        for record in run:
            grouped[record.sentence_id].append(record)
    return grouped


def count_notes(records: Sequence[AnnotationRecord]) -> dict[str, int]:
    fallbacks = sum(FALLBACK_NOTE in r.notes for r in records)
    novel = sum(int(n[len(NOVEL_PREFIX):]) for r in records for n in r.notes if n.startswith(NOVEL_PREFIX))
    return {"fallbacks": fallbacks, "novel_opinions": novel}


async def run_adjudication(
    entries: Sequence[Entry],
    runs: Sequence[Sequence[AnnotationRecord]],
    mode: AdjudicationMode | str,
    path: Path,
    adjudicator: LlmAdjudicator | None = None,
) -> list[AnnotationRecord]:
    mode = AdjudicationMode(mode)
    grouped = group_by_sentence(entries, runs)

    if mode is AdjudicationMode.MAJORITY:
        model = adjudicator.params.model if adjudicator else None
        records = [
            AnnotationRecord(
                sentence_id=e.sentence.id,
                annotator_id=adjudicator_id(model, mode),
                annotations=adjudicate_majority(grouped[e.sentence.id]),
                prompt_hash=candidates_hash(grouped[e.sentence.id]),
            )
            for e in entries
        ]
    else:
        if adjudicator is None:
            raise UsageError("LLM adjudication needs an adjudicator")
        records = await asyncio.gather(
            *(adjudicator.adjudicate(e.sentence, grouped[e.sentence.id]) for e in entries)
        )

    write_run(list(records), path)
    logger.info(f"adjudication ({mode}): wrote {len(records)} records to {path} {count_notes(records)}")
    return sorted(records, key=lambda r: r.sentence_id)
