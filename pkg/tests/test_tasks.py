import json
from pathlib import Path

import pytest
from inspect_ai import eval
from inspect_ai.scorer import SampleScore, Score

from opinion_forge.tasks import entry_to_sample, micro_f1, opinion_annotation


def _score(matched: int, gold: int, pred: int) -> SampleScore:
    return SampleScore(score=Score(value=matched == gold == pred, metadata={"matched": matched, "gold": gold, "pred": pred}))


def test_entry_to_sample(acos_examples):
    sample = entry_to_sample(acos_examples.entries[1])
    assert sample.id == "examples.test.00002"
    assert sample.input == acos_examples.entries[1].sentence.text
    assert {"aspect": None, "category": "drinks#style", "sentiment": "positive", "opinion": "hit"} in json.loads(sample.target)
    assert sample.metadata == {"sentence_id": "examples.test.00002"}


def test_micro_f1_sums_counts_over_samples():
    metric_fn = micro_f1()
    # matched 1 of 2 gold with 3 predictions
    assert metric_fn([_score(1, 2, 2), _score(0, 0, 1)]) == pytest.approx(0.4)
    assert metric_fn([_score(2, 2, 2)]) == 1.0
    assert metric_fn([]) == 0.0


def test_task_is_built_from_the_splits(corpus: dict[str, Path], task):
    built = opinion_annotation(task=str(task), test_file=str(corpus["test"]), dev_file=str(corpus["dev"]), k=5)
    assert len(built.dataset) == 50
    assert built.dataset[0].id == "data.test.00001"


def test_task_runs_on_a_mock_model(corpus: dict[str, Path], task, tmp_path: Path):
    built = opinion_annotation(task=str(task), test_file=str(corpus["test"]), dev_file=str(corpus["dev"]), k=5)
    (log,) = eval(built, model="mockllm/model", limit=3, log_dir=str(tmp_path / "logs"), display="none")
    assert log.status == "success"
    metrics = log.results.scores[0].metrics
    # the mock reply holds no opinion list
    (f1,) = [m.value for name, m in metrics.items() if name.endswith("micro_f1")]
    assert f1 == 0.0
