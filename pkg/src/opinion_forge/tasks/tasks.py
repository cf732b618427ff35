import json
from pathlib import Path

from dotenv import load_dotenv
from inspect_ai import Task, task
from inspect_ai.dataset import MemoryDataset, Sample
from inspect_ai.model import ChatMessageAssistant, ChatMessageSystem, ChatMessageUser, GenerateConfig
from inspect_ai.scorer import Score, Target, accuracy, scorer, stderr
from inspect_ai.solver import Generate, TaskState, generate, solver

from opinion_forge.annotators import parse_llm_output
from opinion_forge.corpora import Entry, SplitName, load_split, partition_dev
from opinion_forge.opinions import AnnotationSet, OpinionTask, Sentence
from opinion_forge.prompts import PromptProgram, build_program, render_prompt, sample_demos
from opinion_forge.tasks.utils import micro_f1


load_dotenv()

CHAT_MESSAGES = {
    "system": ChatMessageSystem,
    "user": ChatMessageUser,
    "assistant": ChatMessageAssistant,
}


def entry_to_sample(entry: Entry) -> Sample:
    return Sample(
        id=entry.sentence.id,
        input=entry.sentence.text,
        target=json.dumps(entry.gold.to_json(), ensure_ascii=False),
        metadata={"sentence_id": entry.sentence.id},
    )


@solver
def prompt_program(program: PromptProgram):
    """Replace the conversation with the program's rendered chat messages."""

    async def solve(state: TaskState, generate: Generate) -> TaskState:
        sentence = Sentence.from_text(state.metadata["sentence_id"], state.input_text)
        rendered = render_prompt(program, sentence)
        state.messages = [CHAT_MESSAGES[m["role"]](content=m["content"]) for m in rendered.messages]
        state.metadata["prompt_hash"] = rendered.prompt_hash
        return state

    return solve


@scorer(metrics=[accuracy(), stderr(), micro_f1()])
def opinion_match(opinion_task: str = "aste"):
    """Exact opinion match; the sample is correct when the whole set matches."""
    opinion_task = OpinionTask(opinion_task)

    async def score(state: TaskState, target: Target) -> Score:
        parsed = parse_llm_output(state.output.completion, opinion_task)
        gold = AnnotationSet.from_json(opinion_task, json.loads(target.text))
        matched = len(parsed.annotations.opinions & gold.opinions)
        return Score(
            value=parsed.annotations == gold,
            answer=json.dumps(parsed.annotations.to_json(), ensure_ascii=False),
            explanation=str(parsed.status),
            metadata={"matched": matched, "gold": len(gold), "pred": len(parsed.annotations)},
        )

    return score


@task
def opinion_annotation(
    task: str = "aste",
    test_file: str = "data/aste/res14/test.txt",
    dev_file: str = "data/aste/res14/dev.txt",
    k: int = 10,
    seed: int = 0,
) -> Task:
    """Few-shot opinion annotation of one test split.

    Args:
        task: 'aste' or 'acos'
        test_file: upstream-format test split
        dev_file: upstream-format dev split; demos come from its ICL pool half
        k: number of in-context demos
        seed: seed for the dev partition and the demo draw
    """
    opinion_task = OpinionTask(task)
    domain = Path(test_file).parent.name
    test = load_split(Path(test_file), opinion_task, domain, SplitName.TEST)
    dev = load_split(Path(dev_file), opinion_task, domain, SplitName.DEV)
    partition = partition_dev(dev.entries, seed)
    program = build_program(opinion_task, sample_demos(partition.icl_pool, k, seed))

    return Task(
        dataset=MemoryDataset([entry_to_sample(e) for e in test.entries], name=f"{domain}-{task}"),
        solver=[prompt_program(program), generate()],
        scorer=opinion_match(task),
        config=GenerateConfig(temperature=0.0, max_tokens=16384),
    )
