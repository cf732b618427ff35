"""Chat backends: any OpenAI-compatible endpoint, or a scripted mock for tests."""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import openai
from dotenv import load_dotenv
from openai import AsyncOpenAI

from opinion_forge.errors import ApiError, GatewayTimeout, TransportError
from opinion_forge.prompts import Message


load_dotenv()

API_KEY_ENV = "OPINION_FORGE_API_KEY"


@dataclass(frozen=True, slots=True)
class ChatParams:
    model: str
    endpoint: str = "http://localhost:8000/v1"
    temperature: float = 0.0
    max_output_tokens: int = 16384
    timeout: float = 600.0
    max_retries: int = 3
    backoff: float = 1.0
    # output limit of the serving endpoint, when lower than max_output_tokens
    endpoint_max_output_tokens: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @property
    def effective_max_tokens(self) -> int:
        if self.endpoint_max_output_tokens is None:
            return self.max_output_tokens
        return min(self.max_output_tokens, self.endpoint_max_output_tokens)


@dataclass(frozen=True, slots=True)
class Completion:
    text: str
    usage: dict[str, int] = field(default_factory=dict)
    latency: float = 0.0
    attempts: int = 1
    cached: bool = False


class Backend(Protocol):
    async def chat(
        self, messages: Sequence[Message], params: ChatParams, *, sentence_id: str | None = None
    ) -> Completion: ...


class OpenAIBackend:
    """Backend for POST ``{endpoint}/chat/completions``.

    Retries are owned by the gateway, so the SDK client is built with ``max_retries=0``.
    """

    def __init__(self, api_key: str | None = None):
        self.api_key = api_key or os.getenv(API_KEY_ENV) or "not-needed"
        self._clients: dict[str, AsyncOpenAI] = {}

    def _client(self, endpoint: str) -> AsyncOpenAI:
        if endpoint not in self._clients:
            self._clients[endpoint] = AsyncOpenAI(base_url=endpoint, api_key=self.api_key, max_retries=0)
        return self._clients[endpoint]

    async def chat(
        self, messages: Sequence[Message], params: ChatParams, *, sentence_id: str | None = None
    ) -> Completion:
        try:
            response = await self._client(params.endpoint).chat.completions.create(
                model=params.model,
                messages=list(messages),
                temperature=params.temperature,
                max_tokens=params.effective_max_tokens,
                timeout=params.timeout,
            )
        except openai.APITimeoutError as e:
            raise GatewayTimeout(f"{params.endpoint} timed out after {params.timeout}s") from e
        except openai.APIConnectionError as e:
            raise TransportError(f"cannot reach {params.endpoint}: {e}") from e
        except openai.APIStatusError as e:
            raise ApiError(e.status_code, e.response.text if e.response is not None else str(e.body)) from e

        usage = response.usage.model_dump(include={"prompt_tokens", "completion_tokens", "total_tokens"}) if response.usage else {}
        return Completion(text=response.choices[0].message.content or "", usage=usage)


Responder = Callable[[str | None, Sequence[Message]], str]


class MockBackend:
    """Scripted backend keyed by sentence id.

    ``responder`` maps (sentence_id, messages) to the reply text and may raise
    gateway errors to simulate a failing endpoint. ``calls`` counts every request.
    """

    def __init__(self, responder: Responder):
        self.responder = responder
        self.calls = 0
        self.calls_by_id: dict[str | None, int] = {}

    @classmethod
    def from_mapping(cls, responses: dict[str, str | list[str]], default: str = "[]") -> "MockBackend":
        """Replies from a mapping; a list value is played back one item per call, the last one repeating."""
        backend: MockBackend

        def respond(sentence_id: str | None, messages: Sequence[Message]) -> str:
            reply = responses.get(sentence_id, default) if sentence_id is not None else default
            if isinstance(reply, list):
                seen = backend.calls_by_id.get(sentence_id, 1) - 1
                return reply[min(seen, len(reply) - 1)]
            return reply

        backend = cls(respond)
        return backend

    @classmethod
    def from_fixture(cls, path: Path) -> "MockBackend":
        return cls.from_mapping(json.loads(Path(path).read_text(encoding="utf-8")))

    async def chat(
        self, messages: Sequence[Message], params: ChatParams, *, sentence_id: str | None = None
    ) -> Completion:
        self.calls += 1
        self.calls_by_id[sentence_id] = self.calls_by_id.get(sentence_id, 0) + 1
        text = self.responder(sentence_id, messages)
        return Completion(text=text, usage={"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0})
