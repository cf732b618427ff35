"""Artifact layout under ``<workdir>/<dataset>/``.

    partition.json                 dev split ids of the ICL pool and the eval half
    ranking.json                   eval-half F1 per annotator and the A1..Ak order
    <annotator>/selection.json     per-k F1 on the eval half and the chosen k
    <annotator>/eval_half.jsonl    records of the chosen k on the eval half
    <annotator>/test.jsonl         annotation run on the test split
    adjudicator/selection.json     ICL selection of the adjudication prompt
    adjudicator-<mode>/test.jsonl  adjudicated run
    metrics.csv, agreement.csv, errors.jsonl

Every artifact ``x.ext`` has a manifest ``x.manifest.json`` next to it.
"""

import json
from pathlib import Path
from typing import Any

from opinion_forge.corpora import RunManifest
from opinion_forge.errors import MissingArtifact
from opinion_forge.pipeline.config import ADJUDICATOR, PipelineConfig


def manifest_path(artifact: Path) -> Path:
    return artifact.with_name(f"{artifact.stem}.manifest.json")


class Workspace:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.root = Path(config.workdir) / config.dataset.name

    @property
    def partition(self) -> Path:
        return self.root / "partition.json"

    @property
    def ranking(self) -> Path:
        return self.root / "ranking.json"

    @property
    def metrics(self) -> Path:
        return self.root / "metrics.csv"

    @property
    def agreement(self) -> Path:
        return self.root / "agreement.csv"

    @property
    def errors(self) -> Path:
        return self.root / "errors.jsonl"

    @property
    def report_dir(self) -> Path:
        return Path(self.config.workdir) / "report"

    def annotator_dir(self, annotator_id: str) -> Path:
        return self.root / annotator_id

    def selection(self, annotator_id: str) -> Path:
        return self.annotator_dir(annotator_id) / "selection.json"

    def eval_half_run(self, annotator_id: str) -> Path:
        return self.annotator_dir(annotator_id) / "eval_half.jsonl"

    def test_run(self, annotator_id: str) -> Path:
        return self.annotator_dir(annotator_id) / "test.jsonl"

    def adjudicated_run(self, mode: str) -> Path:
        return self.root / f"{ADJUDICATOR}-{mode}" / "test.jsonl"

    def adjudicated_runs(self) -> list[Path]:
        return sorted(self.root.glob(f"{ADJUDICATOR}-*/test.jsonl"))

    def require(self, artifact: Path, what: str, hint: str) -> RunManifest:
        """Manifest of an upstream artifact, checked against the artifact's bytes."""
        manifest = manifest_path(artifact)
        if not artifact.is_file() or not manifest.is_file():
            raise MissingArtifact(f"missing {what}: {artifact} ({hint})")
        recorded = RunManifest.read(manifest)
        recorded.verify_output(artifact)
        return recorded

    def read_json(self, artifact: Path, what: str, hint: str) -> tuple[Any, RunManifest]:
        manifest = self.require(artifact, what, hint)
        return json.loads(artifact.read_text(encoding="utf-8")), manifest
