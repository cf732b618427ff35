import asyncio
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from loguru import logger

from opinion_forge.annotators.parsing import parse_llm_output
from opinion_forge.corpora import Entry, write_run
from opinion_forge.errors import GatewayError, UsageError
from opinion_forge.gateway import ChatParams, Gateway
from opinion_forge.opinions import AnnotationRecord, AnnotationSet, OpinionTask, ParseStatus, Sentence
from opinion_forge.prompts import Message, PromptProgram, build_program, render_prompt, repair_messages


async def request_annotations(
    gateway: Gateway,
    params: ChatParams,
    messages: Sequence[Message],
    task: OpinionTask,
    *,
    sentence_id: str,
    annotator_id: str,
    prompt_hash: str,
) -> AnnotationRecord:
    """Ask for an opinion list, with one repair call when the first reply is unreadable.

    Gateway errors end up as failed records instead of exceptions.
    """
    notes: list[str] = []

    def failed(raw: str, reason: str) -> AnnotationRecord:
        logger.warning(f"{annotator_id}: {sentence_id} failed ({reason})")
        return AnnotationRecord(
            sentence_id, annotator_id, AnnotationSet.empty(task), raw, prompt_hash,
            ParseStatus.FAILED, (*notes, reason),
        )

    try:
        completion = await gateway.cached_complete(messages, params, sentence_id=sentence_id)
    except GatewayError as e:
        return failed("", f"gateway: {e}")

    raw = completion.text
    parsed = parse_llm_output(raw, task)
    status = ParseStatus.OK
    if parsed.status is ParseStatus.FAILED:
        logger.info(f"{annotator_id}: unreadable output for {sentence_id}, asking for a repair")
        notes.append("repair: first output unreadable")
        try:
            completion = await gateway.cached_complete(repair_messages(messages, raw), params, sentence_id=sentence_id)
        except GatewayError as e:
            return failed(raw, f"gateway: {e}")
        raw = completion.text
        parsed = parse_llm_output(raw, task)
        if parsed.status is ParseStatus.FAILED:
            return failed(raw, "parse: no opinion list after repair")
        status = ParseStatus.REPAIRED

    if parsed.dropped:
        logger.warning(f"{annotator_id}: dropped {len(parsed.dropped)} opinion objects for {sentence_id}: {list(parsed.dropped)}")
        notes.extend(f"dropped: {reason}" for reason in parsed.dropped)
    return AnnotationRecord(sentence_id, annotator_id, parsed.annotations, raw, prompt_hash, status, tuple(notes))


@dataclass
class Annotator:
    """One LLM annotator: a model behind the gateway plus its selected prompt program."""

    annotator_id: str
    task: OpinionTask
    params: ChatParams
    gateway: Gateway
    program: PromptProgram | None = None
    instruction: str | None = None

    def program_for(self, demos: Sequence[Entry]) -> PromptProgram:
        return build_program(self.task, demos, instruction=self.instruction)

    async def annotate_sentence(self, sentence: Sentence, program: PromptProgram | None = None) -> AnnotationRecord:
        program = program or self.program
        if program is None:
            raise UsageError(f"annotator {self.annotator_id} has no prompt program")
        rendered = render_prompt(program, sentence)
        return await request_annotations(
            self.gateway,
            self.params,
            rendered.messages,
            self.task,
            sentence_id=sentence.id,
            annotator_id=self.annotator_id,
            prompt_hash=rendered.prompt_hash,
        )

    async def annotate(self, program: PromptProgram, sentences: Sequence[Sentence]) -> list[AnnotationRecord]:
        records = await asyncio.gather(*(self.annotate_sentence(s, program) for s in sentences))
        return sorted(records, key=lambda r: r.sentence_id)


async def run_annotator(annotator: Annotator, entries: Sequence[Entry], path: Path) -> list[AnnotationRecord]:
    """Annotate every sentence of a split and write the run file."""
    if annotator.program is None:
        raise UsageError(f"annotator {annotator.annotator_id} has no prompt program")
    records = await annotator.annotate(annotator.program, [e.sentence for e in entries])
    write_run(records, path)
    counts = {status: sum(r.parse_status is status for r in records) for status in ParseStatus}
    logger.info(f"{annotator.annotator_id}: wrote {len(records)} records to {path} ({', '.join(f'{k}={v}' for k, v in counts.items())})")
    return records


def rank_annotators(scores: Mapping[str, float]) -> list[str]:
    """Order annotators A1..Ak by descending F1, ties by id."""
    if not scores:
        raise ValueError("need at least one annotator to rank")
    return sorted(scores, key=lambda annotator_id: (-scores[annotator_id], annotator_id))
