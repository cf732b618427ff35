"""Exception hierarchy shared by every opinion_forge module."""

from pathlib import Path


class OpinionForgeError(Exception):
    """Base class for all errors raised by opinion_forge."""


class InvalidTerm(OpinionForgeError, ValueError):
    """An explicit term whose surface is empty after normalization."""


class InvalidAnnotation(OpinionForgeError, ValueError):
    """An opinion that violates the invariants of its formulation."""


class DatasetError(OpinionForgeError, ValueError):
    """A dataset line that does not follow the upstream grammar."""

    def __init__(self, message: str, line_no: int | None = None, path: Path | str | None = None):
        self.message = message
        self.line_no = line_no
        self.path = path
        super().__init__(str(self))

    def __str__(self) -> str:
        where = []
        if self.path is not None:
            where.append(str(self.path))
        if self.line_no is not None:
            where.append(f"line {self.line_no}")
        return f"{':'.join(where)}: {self.message}" if where else self.message


class ParseError(DatasetError):
    pass


class SpanError(DatasetError):
    pass


class LabelError(DatasetError):
    pass


class TooSmall(OpinionForgeError, ValueError):
    """Dev split too small to partition."""


class InsufficientPool(OpinionForgeError, ValueError):
    """More demonstrations requested than the ICL pool holds."""


class SelectionError(OpinionForgeError):
    """No ICL count produced a single parseable annotation."""


class IntegrityError(OpinionForgeError):
    """Artifacts disagree with each other (ids, coverage, hashes)."""


class GatewayError(OpinionForgeError):
    """Base class for failures talking to the chat endpoint."""


class TransportError(GatewayError):
    pass


class ApiError(GatewayError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        self.body = body
        super().__init__(f"endpoint returned HTTP {status}: {body[:200]}")


class GatewayTimeout(GatewayError, TimeoutError):
    pass


class CacheError(OpinionForgeError):
    """A cache entry that cannot be read back."""


class UsageError(OpinionForgeError, ValueError):
    """A call that is invalid for the given task or arguments."""


class UndefinedAgreement(OpinionForgeError, ValueError):
    """No unit carries two or more labels, so alpha is undefined."""


class ConfigError(OpinionForgeError):
    pass


class MissingArtifact(OpinionForgeError):
    """An upstream pipeline artifact has not been produced yet."""
