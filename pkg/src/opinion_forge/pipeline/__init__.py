"""The staged annotation pipeline and its command line."""

from .config import (
    ADJUDICATOR,
    AdjudicationConfig,
    AnnotatorConfig,
    DatasetConfig,
    EvalConfig,
    PipelineConfig,
    load_config,
)
from .stages import (
    adjudicate,
    agreement,
    annotate,
    build_gateway,
    evaluate,
    optimize,
    prepare,
    report,
)
from .workspace import Workspace, manifest_path

__all__ = [
    "ADJUDICATOR",
    "AdjudicationConfig",
    "AnnotatorConfig",
    "DatasetConfig",
    "EvalConfig",
    "PipelineConfig",
    "Workspace",
    "adjudicate",
    "agreement",
    "annotate",
    "build_gateway",
    "evaluate",
    "load_config",
    "manifest_path",
    "optimize",
    "prepare",
    "report",
]
