from __future__ import annotations
from enum import Enum
from typing import Optional


class SkoslateError(Exception):
    """Base class for every error raised by skoslate."""


class ConfigError(SkoslateError):
    pass


class ParseError(SkoslateError):
    """Malformed RDF input. `line`/`column` are 1-based when the parser reports them."""

    def __init__(self, message: str, *, path: str = "", line: Optional[int] = None,
                 column: Optional[int] = None) -> None:
        self.path = path
        self.line = line
        self.column = column
        where = path
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}" if where else message)


class UnsupportedFormat(SkoslateError):
    pass


class LanguageMissing(SkoslateError, ValueError):
    """The input has no literal in the language a command needs."""


class UnknownConcept(SkoslateError):
    pass


class SerializeError(SkoslateError, OSError):
    pass


class DuplicateProvider(SkoslateError):
    pass


class EmptyCandidates(SkoslateError, ValueError):
    pass


class TooFewCandidates(SkoslateError, ValueError):
    pass


class ModelMissing(SkoslateError):
    pass


class ErrorKind(str, Enum):
    RATE_LIMITED = "rate_limited"
    UNSUPPORTED_PAIR = "unsupported_pair"
    NETWORK = "network"
    MALFORMED_RESPONSE = "malformed_response"
    AUTH = "auth"

    @property
    def retryable(self) -> bool:
        return self in (ErrorKind.RATE_LIMITED, ErrorKind.NETWORK)


class ProviderError(SkoslateError):
    """A failed call to a translation service or LLM endpoint."""

    def __init__(self, kind: ErrorKind, provider_id: str, message: str = "",
                 *, retry_after: Optional[float] = None) -> None:
        self.kind = ErrorKind(kind)
        self.provider_id = provider_id
        self.retry_after = retry_after
        text = f"{provider_id}: {self.kind.value}"
        if message:
            text += f" ({message})"
        super().__init__(text)

    @property
    def retryable(self) -> bool:
        return self.kind.retryable
