"""Exception types shared across the toolkit."""

from __future__ import annotations


class FailforgeError(Exception):
    """Base class for all toolkit errors."""


class ParseError(FailforgeError):
    """A document could not be parsed; carries a location when known."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{message} (at {location})" if location else message)


class SchemaError(FailforgeError):
    """A document parsed but violates the manifest schema."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NotApplicable(FailforgeError):
    """A perturbation rule cannot apply to the given episode."""


class CorpusExhausted(FailforgeError):
    """The corpus cannot supply enough applicable samples for the target."""


class NoPreposition(NotApplicable):
    """The instruction contains no known preposition to swap."""


class MismatchError(FailforgeError):
    """A rollout manifest does not correspond to its directive."""


class GatewayError(FailforgeError):
    """A model endpoint call failed after retries were exhausted."""

    def __init__(self, message: str, status: int | None = None, attempts: int = 0):
        self.status = status
        self.attempts = attempts
        super().__init__(message)


class GatewayTimeoutError(GatewayError, TimeoutError):
    """All attempts against the model endpoint timed out."""


class InvalidTrace(FailforgeError):
    """A generated reasoning trace failed validation after all retries."""


class MissingCot(FailforgeError):
    """A training-export strategy needs a reasoning trace the sample lacks."""


class ShapeError(FailforgeError):
    """Image set does not fit the requested grid layout."""


class VerdictError(FailforgeError):
    """Base class for verdict-parsing failures."""

    def __init__(self, message: str, raw_text: str = ""):
        self.raw_text = raw_text
        super().__init__(message)


class UnparseableVerdict(VerdictError):
    """No answer line was found in the model output."""


class UnknownCategory(VerdictError):
    """The answer line names a category invalid for the query kind."""


class InconsistentVerdict(VerdictError):
    """The answer line pairs a success flag with an incompatible category."""


class UnknownClass(FailforgeError):
    """A gold or predicted category is outside the declared class list."""


class EmptyInput(FailforgeError):
    """A metric was asked to aggregate zero predictions."""


class ExecutorError(FailforgeError):
    """The guarded executor raised; carries the attempts completed so far."""

    def __init__(self, message: str, attempt_log=None, cause: Exception | None = None):
        self.attempt_log = list(attempt_log or [])
        self.cause = cause
        super().__init__(message)
