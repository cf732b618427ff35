from .adjudication import (
    FALLBACK_NOTE,
    AdjudicationMode,
    LlmAdjudicator,
    adjudicate_llm,
    adjudicate_majority,
    adjudicator_id,
    count_notes,
    group_by_sentence,
    run_adjudication,
)
from .prompts import build_adjudication_program, demo_candidates, render_adjudication_prompt

__all__ = [
    "FALLBACK_NOTE",
    "AdjudicationMode",
    "LlmAdjudicator",
    "adjudicate_llm",
    "adjudicate_majority",
    "adjudicator_id",
    "build_adjudication_program",
    "count_notes",
    "demo_candidates",
    "group_by_sentence",
    "render_adjudication_prompt",
    "run_adjudication",
]
