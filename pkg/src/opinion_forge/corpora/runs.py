"""JSONL run files and their manifests."""

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from pydantic import BaseModel, Field

from opinion_forge.errors import IntegrityError
from opinion_forge.opinions import AnnotationRecord
from opinion_forge.utils import atomic_write_text, canonical_json, sha256_file, sha256_text


def write_run(records: list[AnnotationRecord], path: Path) -> str:
    """Write records sorted by sentence id, one JSON object per line.

    Returns the SHA-256 of the written file.
    """
    ids = [r.sentence_id for r in records]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise IntegrityError(f"duplicate sentence ids in run: {dupes[:5]}")
    if len({(r.annotator_id, r.task) for r in records}) > 1:
        raise IntegrityError("a run file holds records of a single annotator and task")

    lines = [
        json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n"
        for r in sorted(records, key=lambda r: r.sentence_id)
    ]
    text = "".join(lines)
    atomic_write_text(Path(path), text)
    return sha256_text(text)


def read_run(path: Path) -> list[AnnotationRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(AnnotationRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError) as e:
                raise IntegrityError(f"{path}:{line_no}: unreadable record: {e}") from e
    ids = [r.sentence_id for r in records]
    if len(set(ids)) != len(ids):
        raise IntegrityError(f"{path}: duplicate sentence ids")
    return records


class RunManifest(BaseModel):
    """Provenance written next to every pipeline artifact.

    ``inputs`` maps upstream artifact names to their SHA-256, ``output_sha256``
    hashes the artifact itself; ``content_hash`` covers everything except timestamps.
    """

    stage: str
    dataset: str
    task: str
    annotator_id: str
    model: str | None = None
    seed: int | None = None
    icl_k: int | None = None
    prompt_hash: str | None = None
    inputs: dict[str, str] = Field(default_factory=dict)
    output_sha256: str | None = None
    extra: dict[str, Any] = Field(default_factory=dict)
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    @property
    def content_hash(self) -> str:
        return sha256_text(canonical_json(self.model_dump(mode="json", exclude={"created_at"})))

    def write(self, path: Path) -> None:
        atomic_write_text(Path(path), self.model_dump_json(indent=2) + "\n")

    @classmethod
    def read(cls, path: Path) -> "RunManifest":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def verify_output(self, artifact: Path) -> None:
        """Raise IntegrityError when the artifact no longer matches its recorded hash."""
        if self.output_sha256 is not None and sha256_file(artifact) != self.output_sha256:
            raise IntegrityError(f"{artifact} changed since its manifest was written")

    def stale_inputs(self, current: Mapping[str, str | None], exact: bool = False) -> list[str]:
        """Recorded inputs whose current hash differs.

        Only names present on both sides are compared unless ``exact``, in which case
        names missing on either side count as stale too.
        """
        names = set(self.inputs) | set(current) if exact else set(self.inputs) & set(current)
        return sorted(name for name in names if self.inputs.get(name) != current.get(name))

    def verify_inputs(self, current: Mapping[str, str | None], artifact: Path, hint: str, exact: bool = False) -> None:
        stale = self.stale_inputs(current, exact)
        if stale:
            raise IntegrityError(f"{artifact} is stale: {', '.join(stale)} changed since it was written ({hint})")
