"""LLM annotators, adjudication and evaluation for aspect-based sentiment corpora."""

from . import adjudication, annotators, corpora, gateway, metrics, opinions, pipeline, prompts

__all__ = [
    "adjudication",
    "annotators",
    "corpora",
    "gateway",
    "metrics",
    "opinions",
    "pipeline",
    "prompts",
    "tasks",
]
