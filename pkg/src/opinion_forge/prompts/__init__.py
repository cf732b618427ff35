"""Prompt programs: instruction, field schema and ICL demonstrations."""

from .prompts import (
    FORMAT_CONTRACT,
    ICL_COUNTS,
    REPAIR_INSTRUCTION,
    FieldSpec,
    Message,
    PromptProgram,
    TEXT_FIELD,
    RenderedPrompt,
    build_program,
    format_opinions,
    load_template,
    program_hash,
    prompt_hash,
    render_messages,
    render_prompt,
    repair_messages,
    sample_demos,
)
from .selection import IclSelectionReport, SupportsAnnotation, choose_k, select_icl_count

__all__ = [
    "FORMAT_CONTRACT",
    "ICL_COUNTS",
    "REPAIR_INSTRUCTION",
    "FieldSpec",
    "IclSelectionReport",
    "Message",
    "PromptProgram",
    "RenderedPrompt",
    "SupportsAnnotation",
    "TEXT_FIELD",
    "build_program",
    "choose_k",
    "format_opinions",
    "load_template",
    "program_hash",
    "prompt_hash",
    "render_messages",
    "render_prompt",
    "repair_messages",
    "sample_demos",
    "select_icl_count",
]
