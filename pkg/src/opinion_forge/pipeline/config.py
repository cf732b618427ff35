"""TOML pipeline configuration."""

import tomllib
from pathlib import Path
from typing import Literal

import pydantic
from pydantic import Field

from opinion_forge.adjudication import AdjudicationMode
from opinion_forge.errors import ConfigError, UsageError
from opinion_forge.gateway import ChatParams
from opinion_forge.metrics import Projection, projections_for
from opinion_forge.opinions import OpinionTask
from opinion_forge.prompts import ICL_COUNTS


ADJUDICATOR = "adjudicator"


class DatasetConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid")

    name: str = Field(pattern=r"^[A-Za-z0-9][\w.-]*$")
    task: OpinionTask
    dev: Path
    test: Path


class AnnotatorConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid")

    model: str
    endpoint: str = "http://localhost:8000/v1"
    temperature: float = Field(0.0, ge=0)
    max_output_tokens: int = Field(16384, gt=0)
    endpoint_max_output_tokens: int | None = Field(None, gt=0)
    timeout: float = Field(600.0, gt=0)
    max_retries: int = Field(3, ge=0)
    backoff: float = Field(1.0, ge=0)
    # overrides the task's instruction template
    instruction: str | None = None

    def chat_params(self) -> ChatParams:
        return ChatParams(
            model=self.model,
            endpoint=self.endpoint,
            temperature=self.temperature,
            max_output_tokens=self.max_output_tokens,
            timeout=self.timeout,
            max_retries=self.max_retries,
            backoff=self.backoff,
            endpoint_max_output_tokens=self.endpoint_max_output_tokens,
        )


class AdjudicationConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid")

    mode: AdjudicationMode = AdjudicationMode.LLM
    # default: the best-ranked annotator's model and endpoint
    model: str | None = None
    endpoint: str | None = None
    icl_k: int = Field(5, ge=0)


class EvalConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid")

    projections: list[Projection] | None = None


class PipelineConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid")

    workdir: Path = Path("runs")
    cache_dir: Path = Path("cache")
    max_inflight: int = Field(4, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    icl_counts: list[int] = Field(default_factory=lambda: list(ICL_COUNTS), min_length=1)
    backend: Literal["openai", "mock"] = "openai"
    mock_fixture: Path | None = None
    dataset: DatasetConfig
    annotators: dict[str, AnnotatorConfig] = Field(min_length=1)
    adjudication: AdjudicationConfig = Field(default_factory=AdjudicationConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @pydantic.field_validator("icl_counts")
    @classmethod
    def _check_icl_counts(cls, value: list[int]) -> list[int]:
        if any(k < 0 for k in value) or len(set(value)) != len(value):
            raise ValueError("icl_counts must be distinct non-negative integers")
        return value

    @pydantic.field_validator("annotators")
    @classmethod
    def _check_annotator_ids(cls, value: dict[str, AnnotatorConfig]) -> dict[str, AnnotatorConfig]:
        for annotator_id in value:
            if annotator_id == ADJUDICATOR or annotator_id.startswith(f"{ADJUDICATOR}-"):
                raise ValueError(f"annotator id {annotator_id!r} is reserved")
            if not annotator_id or not all(c.isalnum() or c in "._-" for c in annotator_id):
                raise ValueError(f"annotator id {annotator_id!r} may only hold letters, digits, '.', '_' and '-'")
        return value

    @pydantic.model_validator(mode="after")
    def _check_consistency(self) -> "PipelineConfig":
        if self.backend == "mock" and self.mock_fixture is None:
            raise ValueError("the mock backend needs mock_fixture")
        if self.eval.projections is not None:
            invalid = set(self.eval.projections) - set(projections_for(self.dataset.task))
            if invalid:
                raise ValueError(f"projections {sorted(invalid)} are not defined for {self.dataset.task}")
        return self

    @property
    def task(self) -> OpinionTask:
        return self.dataset.task

    @property
    def annotator_ids(self) -> list[str]:
        return sorted(self.annotators)

    def annotator(self, annotator_id: str) -> AnnotatorConfig:
        if annotator_id not in self.annotators:
            raise UsageError(f"unknown annotator {annotator_id!r}; configured: {', '.join(self.annotator_ids)}")
        return self.annotators[annotator_id]

    def resolve_paths(self, base: Path) -> "PipelineConfig":
        """Anchor relative paths at ``base``, the directory of the config file."""

        def anchor(path: Path | None) -> Path | None:
            return path if path is None or path.is_absolute() else base / path

        return self.model_copy(update={
            "workdir": anchor(self.workdir),
            "cache_dir": anchor(self.cache_dir),
            "mock_fixture": anchor(self.mock_fixture),
            "dataset": self.dataset.model_copy(update={
                "dev": anchor(self.dataset.dev),
                "test": anchor(self.dataset.test),
            }),
        })


def load_config(path: Path | str, *, seed: int | None = None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML: {e}") from e
    if seed is not None:
        data["seed"] = seed
    try:
        config = PipelineConfig.model_validate(data)
    except pydantic.ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e
    return config.resolve_paths(path.parent.resolve())
