"""Reading opinion lists out of free-form LLM replies."""

import json
import re
from typing import Any, NamedTuple

import json_repair

from opinion_forge.errors import InvalidAnnotation, InvalidTerm
from opinion_forge.opinions import AnnotationSet, OpinionTask, ParseStatus, opinion_from_dict


FENCED_BLOCK = re.compile(r"```[A-Za-z]*[ \t]*\n?(.*?)```", re.DOTALL)

NULL_STRINGS = frozenset({"null", "none"})


class ParsedOutput(NamedTuple):
    annotations: AnnotationSet
    status: ParseStatus
    dropped: tuple[str, ...] = ()


def extract_payload(text: str) -> str:
    """Contents of the last fenced code block, or the whole text when there is none."""
    blocks = FENCED_BLOCK.findall(text)
    return (blocks[-1] if blocks else text).strip()


def load_json(payload: str) -> Any | None:
    """Strict JSON first, then json_repair; None when neither yields a value."""
    try:
        return json.loads(payload)
    except (ValueError, RecursionError):
        pass
    if "[" not in payload and "{" not in payload:
        return None
    try:
        repaired = json_repair.loads(payload)
    except (ValueError, RecursionError, TypeError):
        return None
    return repaired if isinstance(repaired, (list, dict)) else None


def _normalize_nulls(item: dict[str, Any], task: OpinionTask) -> dict[str, Any]:
    if task is not OpinionTask.ACOS:
        return item
    item = dict(item)
    for name in ("aspect", "opinion"):
        value = item.get(name)
        if isinstance(value, str) and value.strip().lower() in NULL_STRINGS:
            item[name] = None
    return item


def parse_llm_output(text: str, task: OpinionTask) -> ParsedOutput:
    """Parse a reply into a canonical opinion set; never raises.

    Objects with missing or invalid fields are dropped and their reasons returned.
    The status is ``failed`` when no JSON list is found or every object was dropped.
    """
    empty = AnnotationSet.empty(task)
    data = load_json(extract_payload(text or ""))
    if isinstance(data, dict):
        data = data["opinions"] if isinstance(data.get("opinions"), list) else [data]
    if not isinstance(data, list):
        return ParsedOutput(empty, ParseStatus.FAILED, ("no JSON list found",))

    opinions, dropped = [], []
    for i, item in enumerate(data):
        if not isinstance(item, dict):
            dropped.append(f"item {i}: not an object")
            continue
        try:
            opinions.append(opinion_from_dict(task, _normalize_nulls(item, task)))
        except (InvalidAnnotation, InvalidTerm) as e:
            dropped.append(f"item {i}: {e}")

    if data and not opinions:
        return ParsedOutput(empty, ParseStatus.FAILED, tuple(dropped))
    return ParsedOutput(AnnotationSet(task, frozenset(opinions)), ParseStatus.OK, tuple(dropped))
