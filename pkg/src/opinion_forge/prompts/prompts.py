import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from textwrap import dedent
from typing import Sequence

import numpy as np

from opinion_forge.corpora import Entry
from opinion_forge.errors import InsufficientPool
from opinion_forge.opinions import AnnotationSet, OpinionTask, Sentence
from opinion_forge.utils import canonical_json, sha256_text


Message = dict[str, str]

ICL_COUNTS = (5, 10, 15)

OUTPUT_SCHEMAS = {
    OpinionTask.ASTE: dedent("""
        opinions: a JSON list of objects, one per opinion triplet:
        {"aspect": string, "sentiment": "positive" | "negative" | "neutral", "opinion": string}
    """).strip(),
    OpinionTask.ACOS: dedent("""
        opinions: a JSON list of objects, one per opinion quadruple:
        {"aspect": string | null, "category": "entity#attribute", "sentiment": "positive" | "negative" | "neutral", "opinion": string | null}
        null marks an implicit aspect or opinion.
    """).strip(),
}

FORMAT_CONTRACT = dedent("""
    Reply with exactly one fenced code block tagged json holding the list, for example:
    ```json
    []
    ```
    Reply with an empty list when the text expresses no opinion. Do not add any other text.
""").strip()

REPAIR_INSTRUCTION = dedent("""
    Your previous reply could not be read as a JSON list of opinion objects.
    Reply again with only the fenced json code block described in the instructions.
""").strip()


@dataclass(frozen=True, slots=True)
class FieldSpec:
    name: str
    description: str


TEXT_FIELD = FieldSpec("text", "a review sentence, whitespace tokenized")


@lru_cache
def load_template(name: str) -> str:
    """Load an instruction template from the templates directory."""
    path = Path(__file__).parent / "templates" / f"{name.lower()}.txt"
    return path.read_text(encoding="utf-8").strip()


@dataclass(frozen=True, slots=True)
class PromptProgram:
    task: OpinionTask
    instruction: str
    input_fields: tuple[FieldSpec, ...]
    output_schema: str
    demos: tuple[Entry, ...] = ()
    # user turns of the demos when they differ from the bare sentence text
    demo_inputs: tuple[str, ...] = ()

    def __post_init__(self):
        if self.demo_inputs and len(self.demo_inputs) != len(self.demos):
            raise ValueError(f"{len(self.demo_inputs)} demo inputs for {len(self.demos)} demos")

    @property
    def k(self) -> int:
        return len(self.demos)

    @property
    def demo_ids(self) -> list[str]:
        return [d.sentence.id for d in self.demos]


@dataclass(frozen=True, slots=True)
class RenderedPrompt:
    messages: tuple[Message, ...]
    prompt_hash: str


def build_program(
    task: OpinionTask,
    demos: Sequence[Entry] = (),
    instruction: str | None = None,
    template: str | None = None,
) -> PromptProgram:
    return PromptProgram(
        task=task,
        instruction=instruction or load_template(template or str(task)),
        input_fields=(TEXT_FIELD,),
        output_schema=OUTPUT_SCHEMAS[task],
        demos=tuple(demos),
    )


def format_opinions(annotations: AnnotationSet) -> str:
    return "```json\n" + json.dumps(annotations.to_json(), ensure_ascii=False) + "\n```"


def system_content(program: PromptProgram) -> str:
    fields = "\n".join(f"- {f.name}: {f.description}" for f in program.input_fields)
    return (
        f"{program.instruction}\n\n"
        f"Input fields:\n{fields}\n\n"
        f"Output field:\n{program.output_schema}\n\n"
        f"{FORMAT_CONTRACT}"
    )


def render_messages(program: PromptProgram, target: str) -> list[Message]:
    messages = [{"role": "system", "content": system_content(program)}]
    inputs = program.demo_inputs or [demo.sentence.text for demo in program.demos]
    for demo, content in zip(program.demos, inputs):
        messages.append({"role": "user", "content": content})
        messages.append({"role": "assistant", "content": format_opinions(demo.gold)})
    messages.append({"role": "user", "content": target})
    return messages


def prompt_hash(messages: Sequence[Message]) -> str:
    return sha256_text(canonical_json(list(messages)))


def program_hash(program: PromptProgram) -> str:
    """Hash of the system message and demos, independent of the target sentence."""
    return prompt_hash(render_messages(program, "")[:-1])


def render_prompt(program: PromptProgram, sentence: Sentence) -> RenderedPrompt:
    messages = render_messages(program, sentence.text)
    return RenderedPrompt(messages=tuple(messages), prompt_hash=prompt_hash(messages))


def repair_messages(messages: Sequence[Message], malformed: str) -> list[Message]:
    return [
        *messages,
        {"role": "assistant", "content": malformed},
        {"role": "user", "content": REPAIR_INSTRUCTION},
    ]


def sample_demos(pool: Sequence[Entry], k: int, seed: int) -> list[Entry]:
    """Draw k demos without replacement.

    Samples for different k under one seed are prefixes of the same permutation.
    """
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    if k > len(pool):
        raise InsufficientPool(f"cannot draw {k} demos from a pool of {len(pool)}")
    order = np.random.default_rng(seed).permutation(len(pool))[:k]
    return [pool[i] for i in order]
