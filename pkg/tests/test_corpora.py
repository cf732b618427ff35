import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ACOS_EXAMPLE_LINES, ASTE_EXAMPLE_LINES, acos_line, aste_line, write_lines
from opinion_forge.corpora import (
    DATASET_BREAKDOWN,
    Entry,
    RunManifest,
    format_acos_line,
    format_aste_line,
    load_split,
    parse_acos_line,
    parse_aste_line,
    partition_dev,
    read_run,
    write_run,
)
from opinion_forge.errors import IntegrityError, LabelError, ParseError, SpanError, TooSmall
from opinion_forge.opinions import (
    IMPLICIT,
    AnnotationRecord,
    AnnotationSet,
    AspectCategory,
    ExplicitTerm,
    OpinionQuad,
    OpinionTask,
    OpinionTriple,
    Sentence,
    SentimentPolarity,
)


def test_parse_aste_examples_line():
    sentence, gold = parse_aste_line(ASTE_EXAMPLE_LINES[0], "res14.test.00001")
    assert sentence.tokens[15] == "fish"
    assert gold.opinions == {
        OpinionTriple(ExplicitTerm("fish"), SentimentPolarity.POSITIVE, ExplicitTerm("excellent"))
    }
    (triple,) = gold.opinions
    assert triple.aspect.span == (15, 16)


def test_parse_aste_multi_token_span():
    sentence, gold = parse_aste_line("great battery life####[([1, 2], [0], 'POS')]", "s")
    assert gold.to_json() == [{"aspect": "battery life", "sentiment": "positive", "opinion": "great"}]


def test_parse_aste_empty_triples():
    _, gold = parse_aste_line("nothing to see here####[]", "s")
    assert len(gold) == 0


def test_parse_acos_quads():
    _, gold = parse_acos_line("menu items are a hit\t0,2 food#quality 2 4,5", "s")
    assert gold.opinions == {
        OpinionQuad(ExplicitTerm("menu items"), AspectCategory("food", "quality"), SentimentPolarity.POSITIVE, ExplicitTerm("hit"))
    }
    _, gold = parse_acos_line("menu items are a hit\t-1,-1 drinks#style 2 4,5", "s")
    (quad,) = gold.opinions
    assert quad.aspect == IMPLICIT and quad.category == AspectCategory("drinks", "style")


@pytest.mark.parametrize(
    "line, error",
    [
        ("great battery life####[([1, 3], [0], 'POS')]", SpanError),
        ("great battery life####[([2, 1], [0], 'POS')]", SpanError),
        ("great battery life####[([1], [0], 'GOOD')]", LabelError),
        ("great battery life####[([1], [0]", ParseError),
        ("great battery life", ParseError),
        ("great####battery####[]", ParseError),
        ("great battery life####[([7], [0], 'POS')]", SpanError),
        ("great battery life####[([1], [0], ['POS'])]", LabelError),
        ("great battery life####[([1], [0], 1)]", LabelError),
        pytest.param("great battery life####" + "[" * 100_000, ParseError, id="deeply-nested"),
    ],
)
def test_aste_errors(line, error):
    with pytest.raises(error):
        parse_aste_line(line, "s", line_no=3)


@pytest.mark.parametrize(
    "line, error",
    [
        ("a hit\t0,1 food#quality 3 1,2", LabelError),
        ("a hit\t0,1 food 2 1,2", ParseError),
        ("a hit\t0,1 food#quality 2", ParseError),
        ("a hit\t0,9 food#quality 2 1,2", SpanError),
        ("a hit\tx,1 food#quality 2 1,2", ParseError),
        ("a hit", ParseError),
    ],
)
def test_acos_errors(line, error):
    with pytest.raises(error):
        parse_acos_line(line, "s")


def test_load_split_reports_file_and_line(tmp_path: Path):
    path = write_lines(tmp_path / "dev.txt", [ASTE_EXAMPLE_LINES[0], "", "bad line####[([0], [0], 'XXX')]"])
    with pytest.raises(LabelError) as info:
        load_split(path, OpinionTask.ASTE, "res14", "dev")
    assert info.value.line_no == 3
    assert str(path) in str(info.value) and "line 3" in str(info.value)


def test_load_split_ids_skip_blank_lines(tmp_path: Path):
    path = write_lines(tmp_path / "test.txt", [ACOS_EXAMPLE_LINES[0], "", ACOS_EXAMPLE_LINES[1]])
    split = load_split(path, OpinionTask.ACOS, "restaurant", "test")
    assert [s.id for s in split.sentences] == ["restaurant.test.00001", "restaurant.test.00003"]


def test_dataset_breakdown_covers_public_releases():
    assert DATASET_BREAKDOWN[(OpinionTask.ASTE, "lap14")] == (906, 219, 328)
    assert DATASET_BREAKDOWN[(OpinionTask.ACOS, "restaurant")] == (1530, 171, 583)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_generated_lines_round_trip(seed):
    rng = np.random.default_rng(seed)
    for i in range(10):
        line = aste_line(rng, "dev", i)
        sentence, gold = parse_aste_line(line, "s")
        assert parse_aste_line(format_aste_line(sentence, gold), "s") == (sentence, gold)

        line = acos_line(rng, "dev", i)
        sentence, gold = parse_acos_line(line, "s")
        assert parse_acos_line(format_acos_line(sentence, gold), "s") == (sentence, gold)


def test_two_hundred_lines_per_task_round_trip():
    rng = np.random.default_rng(0)
    for parse, fmt, make in [
        (parse_aste_line, format_aste_line, aste_line),
        (parse_acos_line, format_acos_line, acos_line),
    ]:
        for i in range(200):
            sentence, gold = parse(make(rng, "test", i), f"s{i}")
            assert parse(fmt(sentence, gold), f"s{i}") == (sentence, gold)


def _entries(n: int) -> list[Entry]:
    return [
        Entry(Sentence.from_text(f"d.dev.{i:05d}", f"sentence {i}"), AnnotationSet.empty(OpinionTask.ASTE))
        for i in range(n)
    ]


@pytest.mark.parametrize(
    "n, sizes",
    [(219, (109, 110)), (310, (155, 155)), (148, (74, 74)), (210, (105, 105)), (326, (163, 163)), (171, (85, 86))],
)
def test_partition_sizes_of_public_dev_splits(n, sizes):
    partition = partition_dev(_entries(n), seed=0)
    assert (len(partition.icl_pool), len(partition.eval_half)) == sizes


@settings(deadline=None)
@given(n=st.integers(2, 300), seed=st.integers(0, 2**63))
def test_partition_law(n, seed):
    entries = _entries(n)
    partition = partition_dev(entries, seed)
    pool, evals = set(partition.pool_ids), set(partition.eval_ids)
    assert not pool & evals
    assert pool | evals == {e.sentence.id for e in entries}
    assert len(pool) == n // 2
    assert partition_dev(entries, seed) == partition


def test_partition_needs_two_entries():
    with pytest.raises(TooSmall):
        partition_dev(_entries(1), seed=0)


def _records(annotator_id: str = "a1") -> list[AnnotationRecord]:
    gold = AnnotationSet.from_json(OpinionTask.ASTE, [{"aspect": "fish", "sentiment": "positive", "opinion": "excellent"}])
    return [
        AnnotationRecord("s2", annotator_id, gold, raw_output="raw"),
        AnnotationRecord("s1", annotator_id, AnnotationSet.empty(OpinionTask.ASTE)),
    ]


def test_run_files_are_sorted_and_stable(tmp_path: Path):
    first = write_run(_records(), tmp_path / "a.jsonl")
    second = write_run(list(reversed(_records())), tmp_path / "b.jsonl")
    assert first == second
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    records = read_run(tmp_path / "a.jsonl")
    assert [r.sentence_id for r in records] == ["s1", "s2"]
    assert json.loads((tmp_path / "a.jsonl").read_text().splitlines()[1])["raw_output"] == "raw"


def test_run_rejects_duplicates_and_mixed_annotators(tmp_path: Path):
    records = _records()
    with pytest.raises(IntegrityError):
        write_run(records + records[:1], tmp_path / "x.jsonl")
    with pytest.raises(IntegrityError):
        write_run([records[0], _records("a2")[1]], tmp_path / "x.jsonl")


def test_empty_run_file(tmp_path: Path):
    write_run([], tmp_path / "empty.jsonl")
    assert (tmp_path / "empty.jsonl").read_text() == ""
    assert read_run(tmp_path / "empty.jsonl") == []


def test_manifest_hash_ignores_timestamp_and_detects_changes(tmp_path: Path):
    sha = write_run(_records(), tmp_path / "run.jsonl")
    manifest = RunManifest(stage="annotate", dataset="d", task="aste", annotator_id="a1", output_sha256=sha)
    later = manifest.model_copy(update={"created_at": "2030-01-01T00:00:00+00:00"})
    assert manifest.content_hash == later.content_hash
    assert manifest.content_hash != manifest.model_copy(update={"icl_k": 5}).content_hash

    manifest.write(tmp_path / "run.manifest.json")
    RunManifest.read(tmp_path / "run.manifest.json").verify_output(tmp_path / "run.jsonl")
    (tmp_path / "run.jsonl").write_text("tampered\n")
    with pytest.raises(IntegrityError):
        manifest.verify_output(tmp_path / "run.jsonl")
