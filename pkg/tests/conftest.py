import json
from pathlib import Path

import numpy as np
import pytest

from opinion_forge.corpora import DatasetSplit, Entry, SplitName, load_split
from opinion_forge.gateway import MockBackend
from opinion_forge.opinions import AnnotationRecord, AnnotationSet, OpinionTask
from opinion_forge.prompts import format_opinions


FISH_TEXT = "I have eaten here three times and have found the quality and variety of the fish to be excellent ."
MENU_TEXT = "All their menu items are a hit , and they serve mimosas ."

ASTE_EXAMPLE_LINES = [
    f"{FISH_TEXT}####[([15], [18], 'POS')]",
    f"{MENU_TEXT}####[([2, 3], [6], 'POS')]",
]
ACOS_EXAMPLE_LINES = [
    f"{FISH_TEXT}\t15,16 food#quality 2 18,19\t15,16 food#style 2 18,19",
    f"{MENU_TEXT}\t2,4 food#quality 2 6,7\t-1,-1 drinks#style 2 6,7",
]

# adjudicated predictions shown next to the gold in the error analysis
ASTE_EXAMPLE_PREDICTIONS = [
    [{"aspect": "quality", "sentiment": "positive", "opinion": "excellent"}],
    [{"aspect": "menu items", "sentiment": "positive", "opinion": "hit"}],
]
ACOS_EXAMPLE_PREDICTIONS = [
    [
        {"aspect": "quality", "category": "food#quality", "sentiment": "positive", "opinion": "excellent"},
        {"aspect": "variety", "category": "food#style", "sentiment": "positive", "opinion": "excellent"},
    ],
    [
        {"aspect": "menu items", "category": "food#quality", "sentiment": "positive", "opinion": "hit"},
        {"aspect": "mimosas", "category": "drinks#general", "sentiment": "neutral", "opinion": None},
    ],
]

ASPECTS = ["battery life", "screen", "keyboard", "price", "service", "pasta", "staff", "wine list"]
OPINIONS = ["great", "poor", "fine", "awful", "excellent", "slow"]
TAGS = ["POS", "NEG", "NEU"]
CATEGORIES = ["laptop#general", "battery#operation_performance", "food#quality", "service#general"]


def aste_line(rng: np.random.Generator, split: str, i: int) -> str:
    """``the <aspect> of <split> item <i> is <opinion> .`` with zero to two triples."""
    aspect = ASPECTS[rng.integers(len(ASPECTS))].split()
    opinion = OPINIONS[rng.integers(len(OPINIONS))]
    tokens = ["the", *aspect, "of", split, "item", str(i), "is", opinion, "."]
    a_idx = list(range(1, 1 + len(aspect)))
    o_idx = [len(tokens) - 2]
    triples = []
    n = int(rng.integers(3))
    if n >= 1:
        triples.append((a_idx, o_idx, TAGS[rng.integers(3)]))
    if n == 2:
        triples.append(([len(aspect) + 3], o_idx, TAGS[rng.integers(3)]))
    return f"{' '.join(tokens)}####{triples!r}"


def acos_line(rng: np.random.Generator, split: str, i: int) -> str:
    """One or two quads, some with an implicit aspect or opinion."""
    aspect = ASPECTS[rng.integers(len(ASPECTS))].split()
    opinion = OPINIONS[rng.integers(len(OPINIONS))]
    tokens = ["the", *aspect, "of", split, "item", str(i), "is", opinion, "."]
    a_span = f"1,{1 + len(aspect)}"
    o_span = f"{len(tokens) - 2},{len(tokens) - 1}"
    quads = [f"{a_span} {CATEGORIES[rng.integers(len(CATEGORIES))]} {rng.integers(3)} {o_span}"]
    if rng.random() < 0.5:
        implicit_aspect = rng.random() < 0.5
        quads.append(
            f"{'-1,-1' if implicit_aspect else a_span} {CATEGORIES[rng.integers(len(CATEGORIES))]} "
            f"{rng.integers(3)} {o_span if implicit_aspect else '-1,-1'}"
        )
    return "\t".join([" ".join(tokens), *quads])


def corpus_lines(task: OpinionTask, split: str, n: int = 50, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    make = aste_line if task is OpinionTask.ASTE else acos_line
    return [make(rng, split, i) for i in range(n)]


def write_lines(path: Path, lines: list[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    return path


def gold_replies(*splits: DatasetSplit) -> dict[str, str]:
    return {e.sentence.id: format_opinions(e.gold) for split in splits for e in split.entries}


def gold_records(entries: list[Entry], annotator_id: str = "gold") -> list[AnnotationRecord]:
    return [AnnotationRecord(e.sentence.id, annotator_id, e.gold) for e in entries]


def write_config(
    root: Path,
    task: OpinionTask,
    dev: Path,
    test: Path,
    fixture: Path | None = None,
    *,
    annotators: int = 3,
    name: str = "synthetic",
    extra: str = "",
) -> Path:
    lines = [
        'workdir = "runs"',
        'cache_dir = "cache"',
        "seed = 7",
        'backend = "mock"',
        f'mock_fixture = "{fixture or root / "replies.json"}"',
        extra,
        "",
        "[dataset]",
        f'name = "{name}"',
        f'task = "{task}"',
        f'dev = "{dev}"',
        f'test = "{test}"',
        "",
    ]
    for i in range(annotators):
        lines += [f"[annotators.a{i + 1}]", f'model = "mock-{i + 1}"', "max_retries = 0", "backoff = 0.0", ""]
    path = root / "pipeline.toml"
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


@pytest.fixture
def aste_examples() -> DatasetSplit:
    from opinion_forge.corpora import parse_aste_line

    entries = [Entry(*parse_aste_line(line, f"examples.test.{i:05d}")) for i, line in enumerate(ASTE_EXAMPLE_LINES, 1)]
    return DatasetSplit(SplitName.TEST, OpinionTask.ASTE, "examples", tuple(entries))


@pytest.fixture
def acos_examples() -> DatasetSplit:
    from opinion_forge.corpora import parse_acos_line

    entries = [Entry(*parse_acos_line(line, f"examples.test.{i:05d}")) for i, line in enumerate(ACOS_EXAMPLE_LINES, 1)]
    return DatasetSplit(SplitName.TEST, OpinionTask.ACOS, "examples", tuple(entries))


@pytest.fixture(params=[OpinionTask.ASTE, OpinionTask.ACOS], ids=str)
def task(request) -> OpinionTask:
    return request.param


@pytest.fixture
def corpus(tmp_path: Path, task: OpinionTask) -> dict[str, Path]:
    """A 50-sentence dev and test split in the upstream format."""
    return {
        "dev": write_lines(tmp_path / "data" / "dev.txt", corpus_lines(task, "dev", seed=1)),
        "test": write_lines(tmp_path / "data" / "test.txt", corpus_lines(task, "test", seed=2)),
    }


@pytest.fixture
def splits(corpus: dict[str, Path], task: OpinionTask) -> dict[str, DatasetSplit]:
    return {
        name: load_split(path, task, "synthetic", SplitName(name))
        for name, path in corpus.items()
    }


@pytest.fixture
def gold_echo(splits: dict[str, DatasetSplit]) -> MockBackend:
    return MockBackend.from_mapping(gold_replies(*splits.values()))


@pytest.fixture
def empty_backend() -> MockBackend:
    return MockBackend.from_mapping({}, default="```json\n[]\n```")


@pytest.fixture
def config_path(tmp_path: Path, task: OpinionTask, corpus: dict[str, Path], splits: dict[str, DatasetSplit]) -> Path:
    fixture = tmp_path / "replies.json"
    fixture.write_text(json.dumps(gold_replies(*splits.values())), encoding="utf-8")
    return write_config(tmp_path, task, corpus["dev"], corpus["test"], fixture)


def set_of(task: OpinionTask, items: list[dict]) -> AnnotationSet:
    return AnnotationSet.from_json(task, items)


@pytest.fixture
def log_messages():
    """Messages logged through loguru while the test runs."""
    from loguru import logger

    messages: list[str] = []
    handler = logger.add(lambda message: messages.append(message.record["message"]), level="DEBUG")
    yield messages
    logger.remove(handler)
