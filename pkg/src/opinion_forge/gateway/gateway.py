import asyncio
import time
from collections import Counter
from typing import Sequence

from loguru import logger
from tenacity import (
    AsyncRetrying,
    RetryCallState,
    retry_if_exception,
    stop_after_attempt,
    wait_exponential,
)

from opinion_forge.errors import ApiError, CacheError, GatewayTimeout, TransportError
from opinion_forge.gateway.backends import Backend, ChatParams, Completion
from opinion_forge.gateway.cache import ResponseCache, cache_key
from opinion_forge.prompts import Message


RETRYABLE_STATUS = frozenset({408, 429})


def is_retryable(exc: BaseException) -> bool:
    if isinstance(exc, (TransportError, GatewayTimeout)):
        return True
    return isinstance(exc, ApiError) and (exc.status >= 500 or exc.status in RETRYABLE_STATUS)


def _log_retry(state: RetryCallState) -> None:
    logger.warning(
        f"attempt {state.attempt_number} failed ({state.outcome.exception()}), "
        f"retrying in {state.next_action.sleep:.1f}s"
    )


class Gateway:
    """Bounded, retrying and cached access to a chat backend.

    Safe for concurrent use from one event loop: ``max_inflight`` caps the
    requests in flight, and identical cached requests share one upstream call.
    """

    def __init__(self, backend: Backend, *, cache: ResponseCache | None = None, max_inflight: int = 4):
        self.backend = backend
        self.cache = cache
        self.max_inflight = max_inflight
        self._loop: asyncio.AbstractEventLoop | None = None
        self._semaphore = asyncio.Semaphore(max_inflight)
        self._key_locks: dict[str, asyncio.Lock] = {}
        # tasks holding or waiting on each key lock
        self._key_users: Counter[str] = Counter()
        self._clamp_warned: set[tuple[str, int]] = set()

    def _bind_loop(self) -> None:
        # asyncio primitives belong to one loop; each pipeline stage runs its own
        loop = asyncio.get_running_loop()
        if loop is not self._loop:
            self._loop = loop
            self._semaphore = asyncio.Semaphore(self.max_inflight)
            self._key_locks = {}
            self._key_users = Counter()

    def _warn_clamp(self, params: ChatParams) -> None:
        if params.effective_max_tokens == params.max_output_tokens:
            return
        marker = (params.model, params.effective_max_tokens)
        if marker not in self._clamp_warned:
            self._clamp_warned.add(marker)
            logger.warning(
                f"{params.model}: max_output_tokens {params.max_output_tokens} clamped "
                f"to the endpoint limit {params.effective_max_tokens}"
            )

    async def complete(
        self, messages: Sequence[Message], params: ChatParams, *, sentence_id: str | None = None
    ) -> Completion:
        """One completion, retried with exponential backoff on transport errors, 429 and 5xx."""
        self._bind_loop()
        self._warn_clamp(params)
        started = time.perf_counter()
        attempts = 0
        retrying = AsyncRetrying(
            stop=stop_after_attempt(params.max_retries + 1),
            wait=wait_exponential(multiplier=params.backoff, max=60),
            retry=retry_if_exception(is_retryable),
            before_sleep=_log_retry,
            reraise=True,
        )
        async for attempt in retrying:
            with attempt:
                attempts = attempt.retry_state.attempt_number
                async with self._semaphore:
                    completion = await self.backend.chat(messages, params, sentence_id=sentence_id)
        return Completion(
            text=completion.text,
            usage=completion.usage,
            latency=time.perf_counter() - started,
            attempts=attempts,
        )

    async def cached_complete(
        self, messages: Sequence[Message], params: ChatParams, *, sentence_id: str | None = None
    ) -> Completion:
        if self.cache is None:
            return await self.complete(messages, params, sentence_id=sentence_id)

        self._bind_loop()
        key = cache_key(messages, params)
        lock = self._key_locks.setdefault(key, asyncio.Lock())
        self._key_users[key] += 1
        try:
            async with lock:
                try:
                    hit = self.cache.get(key)
                except CacheError as e:
                    logger.warning(f"{e}; asking the endpoint again")
                    hit = None
                if hit is not None:
                    return hit
                completion = await self.complete(messages, params, sentence_id=sentence_id)
                self.cache.put(key, params.model, completion)
                return completion
        finally:
            self._key_users[key] -= 1
            if not self._key_users[key]:
                del self._key_users[key]
                del self._key_locks[key]
