"""Access to OpenAI-compatible chat endpoints."""

from .backends import API_KEY_ENV, Backend, ChatParams, Completion, MockBackend, OpenAIBackend
from .cache import ResponseCache, cache_key
from .gateway import Gateway, is_retryable

__all__ = [
    "API_KEY_ENV",
    "Backend",
    "ChatParams",
    "Completion",
    "Gateway",
    "MockBackend",
    "OpenAIBackend",
    "ResponseCache",
    "cache_key",
    "is_retryable",
]
