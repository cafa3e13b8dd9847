"""Exception hierarchy shared by every VaryBalance component."""

from __future__ import annotations


class VaryBalanceError(Exception):
    """Base class for all package errors."""


class InvalidText(VaryBalanceError, ValueError):
    """Text is empty after whitespace trimming."""


class TooShort(VaryBalanceError, ValueError):
    """Fewer scored tokens than the configured minimum."""


class ProviderError(VaryBalanceError):
    """A rewrite, generation or scoring provider failed.

    ``attempts`` is the number of tries made before giving up and
    ``status`` the last HTTP status seen, when there was one.
    """

    def __init__(self, message: str, *, attempts: int = 1, status: int | None = None, retryable: bool = False):
        super().__init__(message)
        self.attempts = attempts
        self.status = status
        self.retryable = retryable


class EmptyRewrite(ProviderError):
    """The rewriter kept returning blank text."""


class EmptyCorpus(VaryBalanceError, ValueError):
    pass


class EmptyRewrites(VaryBalanceError, ValueError):
    pass


class TooFewRewrites(VaryBalanceError, ValueError):
    """The expansion score needs at least two rewrites."""


class NonFinite(VaryBalanceError, ArithmeticError):
    pass


class EmptyClass(VaryBalanceError, ValueError):
    pass


class UnlabeledSample(VaryBalanceError, ValueError):
    def __init__(self, sample_id: str):
        super().__init__(f"sample {sample_id!r} has no Human/Machine label")
        self.sample_id = sample_id


class ParseError(VaryBalanceError, ValueError):
    def __init__(self, message: str, *, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class DuplicateId(VaryBalanceError, ValueError):
    pass


class TooFewSamples(VaryBalanceError, ValueError):
    pass


class StoreCorrupt(VaryBalanceError):
    pass


class StoreUnwritable(VaryBalanceError, OSError):
    pass


class StageError(VaryBalanceError):
    """Wraps a failure inside the detection pipeline with its context."""

    def __init__(self, sample_id: str, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] sample {sample_id!r}: {cause}")
        self.sample_id = sample_id
        self.stage = stage
        self.cause = cause
