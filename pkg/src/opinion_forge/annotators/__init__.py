"""LLM annotators and the parsing of their replies."""

from .annotators import Annotator, rank_annotators, request_annotations, run_annotator
from .parsing import ParsedOutput, extract_payload, parse_llm_output

__all__ = [
    "Annotator",
    "ParsedOutput",
    "extract_payload",
    "parse_llm_output",
    "rank_annotators",
    "request_annotations",
    "run_annotator",
]
