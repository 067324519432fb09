"""Exception hierarchy shared across the package."""

from __future__ import annotations


class LibInduceError(Exception):
    pass


class ParseError(LibInduceError, SyntaxError):
    """Unbalanced, empty or otherwise malformed S-expression."""


class UnknownIdentifier(LibInduceError):
    def __init__(self, name: str):
        super().__init__(f"unknown identifier: {name!r}")
        self.name = name


class UnboundVariable(LibInduceError):
    pass


class PatternNotPrintable(LibInduceError):
    pass


class InferenceError(LibInduceError, TypeError):
    """Type inference failed (constructor clash, occurs check, arity)."""


class EvaluationError(LibInduceError, RuntimeError):
    """A domain primitive failed or a term could not be reduced."""


class BudgetExceeded(EvaluationError):
    pass


class CycleError(LibInduceError):
    pass


class NameCollision(LibInduceError):
    pass


class CorpusValidationError(LibInduceError):
    def __init__(self, failing: list[str], detail: str = ""):
        msg = f"{len(failing)} task(s) failed validation: {', '.join(failing)}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.failing = failing


class BackendError(LibInduceError):
    pass


class TransientBackendError(BackendError):
    """Retryable failure (HTTP 429 / 5xx, timeouts)."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class MalformedResponse(LibInduceError):
    pass


class PromptBudgetExceeded(LibInduceError):
    pass
