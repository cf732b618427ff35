from dataclasses import replace
from textwrap import dedent
from typing import Sequence

from opinion_forge.corpora import Entry
from opinion_forge.errors import UsageError
from opinion_forge.opinions import AnnotationSet, OpinionTask, Sentence
from opinion_forge.prompts import (
    TEXT_FIELD,
    FieldSpec,
    PromptProgram,
    RenderedPrompt,
    build_program,
    format_opinions,
    prompt_hash,
    render_messages,
)


ADJUDICATION_TEMPLATE = dedent("""
    Here is the text and the annotations to adjudicate:
    [BEGIN DATA]
    ************
    [Text]: {text}
    ************
    {candidates}
    ************
    [END DATA]

    {instructions}
""").strip()

CANDIDATE_TEMPLATE = "[Annotator {index}]:\n{opinions}"

ADJUDICATION_INSTRUCTIONS = dedent("""
    Resolve the disagreements between the annotators and reply with the final opinion list for the text,
    as one fenced json code block in the output format described above.
""").strip()

CANDIDATES_FIELD = FieldSpec(
    "candidates",
    "the opinion lists proposed by the annotators for the text, labelled Annotator 1..k",
)


def adjudication_input(sentence: Sentence, candidates: Sequence[AnnotationSet]) -> str:
    """Annotators are shown as "Annotator 1..k" in the given order, never by model name."""
    blocks = "\n************\n".join(
        CANDIDATE_TEMPLATE.format(index=i, opinions=format_opinions(c))
        for i, c in enumerate(candidates, start=1)
    )
    return ADJUDICATION_TEMPLATE.format(
        text=sentence.text,
        candidates=blocks,
        instructions=ADJUDICATION_INSTRUCTIONS,
    )


def demo_candidates(gold: AnnotationSet, n_annotators: int) -> list[AnnotationSet]:
    """Candidate lists for a demonstration: annotator i misses the i-th gold opinion, if any."""
    opinions = gold.sorted()
    return [
        AnnotationSet(gold.task, frozenset(o for j, o in enumerate(opinions) if j != i))
        for i in range(n_annotators)
    ]


def build_adjudication_program(task: OpinionTask, demos: Sequence[Entry], n_annotators: int) -> PromptProgram:
    """An adjudication program whose demonstrations are adjudications themselves.

    Each demo shows its sentence with ``n_annotators`` candidate lists derived from
    the gold set, answered by the gold set.
    """
    if n_annotators < 2:
        raise UsageError(f"LLM adjudication needs at least two annotators, got {n_annotators}")
    program = build_program(task, demos, template=f"adjudicate_{task}")
    return replace(
        program,
        input_fields=(TEXT_FIELD, CANDIDATES_FIELD),
        demo_inputs=tuple(adjudication_input(d.sentence, demo_candidates(d.gold, n_annotators)) for d in demos),
    )


def render_adjudication_prompt(
    program: PromptProgram,
    sentence: Sentence,
    candidates: Sequence[AnnotationSet],
) -> RenderedPrompt:
    messages = render_messages(program, adjudication_input(sentence, candidates))
    return RenderedPrompt(messages=tuple(messages), prompt_hash=prompt_hash(messages))
