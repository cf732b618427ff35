import asyncio
from pathlib import Path

import pytest

from conftest import FISH_TEXT, gold_replies, set_of
from opinion_forge.annotators import Annotator, extract_payload, parse_llm_output, rank_annotators, run_annotator
from opinion_forge.corpora import read_run
from opinion_forge.errors import ApiError, UsageError
from opinion_forge.gateway import ChatParams, Gateway, MockBackend
from opinion_forge.metrics import Projection, annotations_by_id, exact_match_prf
from opinion_forge.opinions import IMPLICIT, OpinionTask, ParseStatus, Sentence
from opinion_forge.prompts import build_program

FISH = [{"aspect": "fish", "sentiment": "positive", "opinion": "excellent"}]
FISH_REPLY = '```json\n[{"aspect": "Fish", "sentiment": "Positive", "opinion": "excellent"}]\n```'
PARAMS = ChatParams(model="mock", max_retries=0, backoff=0.0)


def _annotator(backend: MockBackend, task: OpinionTask = OpinionTask.ASTE, demos=()) -> Annotator:
    return Annotator("a1", task, PARAMS, Gateway(backend), program=build_program(task, demos))


def test_parse_fenced_reply():
    parsed = parse_llm_output(FISH_REPLY, OpinionTask.ASTE)
    assert parsed.status is ParseStatus.OK
    assert parsed.annotations == set_of(OpinionTask.ASTE, FISH)


def test_parse_prefers_last_fenced_block():
    text = "first try:\n```json\n[]\n```\nfinal answer:\n" + FISH_REPLY
    assert extract_payload(text).startswith('[{"aspect": "Fish"')


@pytest.mark.parametrize("text", ["[]", "```json\n[]\n```", "```\n[]\n```"])
def test_parse_empty_list_is_ok(text):
    parsed = parse_llm_output(text, OpinionTask.ASTE)
    assert parsed.status is ParseStatus.OK and len(parsed.annotations) == 0


@pytest.mark.parametrize("text", ["no json here", "", "```json\n42\n```", '"just a string"'])
def test_parse_without_a_list_fails(text):
    parsed = parse_llm_output(text, OpinionTask.ASTE)
    assert parsed.status is ParseStatus.FAILED
    assert len(parsed.annotations) == 0


def test_parse_wrapped_and_single_objects():
    wrapped = parse_llm_output('{"opinions": ' + FISH_REPLY.split("\n")[1] + "}", OpinionTask.ASTE)
    single = parse_llm_output('{"aspect": "fish", "sentiment": "positive", "opinion": "excellent"}', OpinionTask.ASTE)
    assert wrapped.annotations == single.annotations == set_of(OpinionTask.ASTE, FISH)


def test_parse_repairs_trailing_comma():
    text = '[{"aspect": "fish", "sentiment": "positive", "opinion": "excellent"},]'
    assert parse_llm_output(text, OpinionTask.ASTE).annotations == set_of(OpinionTask.ASTE, FISH)


def test_parse_drops_invalid_objects():
    text = str([
        {"aspect": "fish", "sentiment": "positive", "opinion": "excellent"},
        {"aspect": "fish", "sentiment": "great", "opinion": "excellent"},
        {"aspect": "fish", "opinion": "excellent"},
        "fish",
    ]).replace("'", '"')
    parsed = parse_llm_output(text, OpinionTask.ASTE)
    assert parsed.status is ParseStatus.OK
    assert parsed.annotations == set_of(OpinionTask.ASTE, FISH)
    assert len(parsed.dropped) == 3


def test_parse_fails_when_every_object_is_dropped():
    parsed = parse_llm_output('[{"aspect": null, "sentiment": "positive", "opinion": "great"}]', OpinionTask.ASTE)
    assert parsed.status is ParseStatus.FAILED


def test_parse_acos_null_strings():
    text = '[{"aspect": "NULL", "category": "drinks#style", "sentiment": "positive", "opinion": "None"}]'
    (quad,) = parse_llm_output(text, OpinionTask.ACOS).annotations.opinions
    assert quad.aspect == IMPLICIT and quad.opinion == IMPLICIT


def test_parse_only_returns_reply_opinions():
    parsed = parse_llm_output(FISH_REPLY * 3, OpinionTask.ASTE)
    assert len(parsed.annotations) == 1


RUNAWAY_REPLIES = [
    pytest.param("[" * 100_000, id="nested-brackets"),
    pytest.param("[" + "1" * 5000 + "]", id="long-integer"),
    pytest.param('[{"aspect": "fish", "sentiment": ' + "9" * 5000 + ', "opinion": "excellent"}]', id="long-sentiment"),
]


@pytest.mark.parametrize("text", RUNAWAY_REPLIES)
def test_runaway_replies_fail_without_raising(text):
    parsed = parse_llm_output(text, OpinionTask.ASTE)
    assert parsed.status is ParseStatus.FAILED
    assert len(parsed.annotations) == 0


@pytest.mark.parametrize("text", RUNAWAY_REPLIES)
def test_runaway_replies_become_failed_records(text):
    backend = MockBackend.from_mapping({"examples.test.00001": text})
    record = asyncio.run(_annotator(backend).annotate_sentence(_sentence()))
    assert record.parse_status is ParseStatus.FAILED
    assert backend.calls == 2


def _sentence() -> Sentence:
    return Sentence.from_text("examples.test.00001", FISH_TEXT)


def test_unreadable_reply_is_repaired():
    backend = MockBackend.from_mapping({"examples.test.00001": ["sorry, I cannot", FISH_REPLY]})
    record = asyncio.run(_annotator(backend).annotate_sentence(_sentence()))
    assert record.parse_status is ParseStatus.REPAIRED
    assert record.annotations == set_of(OpinionTask.ASTE, FISH)
    assert record.raw_output == FISH_REPLY
    assert backend.calls == 2
    assert any(note.startswith("repair") for note in record.notes)


def test_repair_is_attempted_once():
    backend = MockBackend.from_mapping({"examples.test.00001": "still not json"})
    record = asyncio.run(_annotator(backend).annotate_sentence(_sentence()))
    assert record.parse_status is ParseStatus.FAILED
    assert len(record.annotations) == 0
    assert record.raw_output == "still not json"
    assert backend.calls == 2


def test_gateway_errors_become_failed_records():
    def refuse(sentence_id, messages):
        raise ApiError(400, "context length exceeded")

    record = asyncio.run(_annotator(MockBackend(refuse)).annotate_sentence(_sentence()))
    assert record.parse_status is ParseStatus.FAILED
    assert "context length exceeded" in record.notes[-1]


def test_records_carry_prompt_hash():
    annotator = _annotator(MockBackend.from_mapping({}, default="[]"))
    first = asyncio.run(annotator.annotate_sentence(_sentence()))
    assert first.prompt_hash and first.annotator_id == "a1"


def test_annotate_needs_a_program():
    annotator = Annotator("a1", OpinionTask.ASTE, PARAMS, Gateway(MockBackend.from_mapping({})))
    with pytest.raises(UsageError):
        asyncio.run(annotator.annotate_sentence(_sentence()))


@pytest.mark.parametrize("fixture", ["aste_examples", "acos_examples"])
def test_gold_echo_run_scores_one(fixture, request, tmp_path: Path):
    split = request.getfixturevalue(fixture)
    annotator = _annotator(MockBackend.from_mapping(gold_replies(split)), split.task)
    records = asyncio.run(run_annotator(annotator, split.entries, tmp_path / "test.jsonl"))
    assert [r.sentence_id for r in records] == sorted(s.id for s in split.sentences)
    assert read_run(tmp_path / "test.jsonl") == records
    gold = {e.sentence.id: e.gold for e in split.entries}
    assert exact_match_prf(gold, annotations_by_id(records), Projection.JOINT).f1 == 1.0


def test_empty_split_writes_empty_run(tmp_path: Path):
    backend = MockBackend.from_mapping({})
    assert asyncio.run(run_annotator(_annotator(backend), [], tmp_path / "test.jsonl")) == []
    assert (tmp_path / "test.jsonl").read_text() == ""
    assert backend.calls == 0


def test_rank_annotators():
    assert rank_annotators({"a1": 0.4, "a2": 0.6, "a3": 0.5}) == ["a2", "a3", "a1"]
    assert rank_annotators({"b": 0.5, "a": 0.5}) == ["a", "b"]
    with pytest.raises(ValueError):
        rank_annotators({})
