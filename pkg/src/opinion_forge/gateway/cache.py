"""Content-addressed response cache laid out as ``<root>/<first 2 hex>/<key>.json``.

A key is the SHA-256 of the request (model, messages, temperature, output limit),
so equal keys mean equal request bytes up to hash collisions.
"""

import json
from pathlib import Path
from typing import Sequence

from opinion_forge.errors import CacheError
from opinion_forge.gateway.backends import ChatParams, Completion
from opinion_forge.prompts import Message
from opinion_forge.utils import atomic_write_text, canonical_json, sha256_text


def request_payload(messages: Sequence[Message], params: ChatParams) -> dict:
    return {
        "model": params.model,
        "messages": list(messages),
        "temperature": params.temperature,
        "max_output_tokens": params.max_output_tokens,
    }


def cache_key(messages: Sequence[Message], params: ChatParams) -> str:
    return sha256_text(canonical_json(request_payload(messages, params)))


class ResponseCache:
    def __init__(self, root: Path):
        self.root = Path(root)

    def path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> Completion | None:
        path = self.path(key)
        if not path.exists():
            return None
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            if entry["key"] != key or not isinstance(entry["text"], str):
                raise ValueError("entry does not belong to its key")
        except (OSError, ValueError, KeyError, TypeError) as e:
            raise CacheError(f"corrupt cache entry {path}: {e}") from e
        return Completion(text=entry["text"], usage=entry.get("usage", {}), latency=0.0, attempts=0, cached=True)

    def put(self, key: str, model: str, completion: Completion) -> None:
        entry = {"key": key, "model": model, "text": completion.text, "usage": completion.usage}
        atomic_write_text(self.path(key), json.dumps(entry, ensure_ascii=False, sort_keys=True, indent=2) + "\n")
