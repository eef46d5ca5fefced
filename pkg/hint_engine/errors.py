"""Exception hierarchy shared by every hint_engine module."""


class HintEngineError(Exception):
    """Base class for all errors raised by the hint generation pipeline."""


# --- Parsing ---

class MalformedXml(HintEngineError, ValueError):
    pass


class MalformedBounds(HintEngineError, ValueError):
    pass


class MissingPackage(HintEngineError, ValueError):
    pass


# --- Entity extraction ---

class DegenerateBounds(HintEngineError, ValueError):
    pass


class BadPath(HintEngineError, LookupError):
    pass


class NotAnInput(HintEngineError, ValueError):
    pass


# --- Example store ---

class DimensionMismatch(HintEngineError, ValueError):
    pass


class DuplicateId(HintEngineError, ValueError):
    pass


class CorruptLine(HintEngineError, ValueError):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


# --- Simulator ---

class SchemaError(HintEngineError, ValueError):
    """Raised when a sim-app spec is invalid. `path` points at the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownField(HintEngineError, KeyError):
    pass


class UnknownScreen(HintEngineError, KeyError):
    pass


# --- LLM backends ---

class BackendError(HintEngineError):
    pass


class NetworkError(BackendError):
    pass


class BackendTimeoutError(BackendError, TimeoutError):
    pass


class MockMiss(BackendError, KeyError):
    pass


class BackendFailure(BackendError):
    pass


class UnparseableResponse(HintEngineError, ValueError):
    pass


class UnparseableAfterReminder(UnparseableResponse):
    pass


# --- Metrics ---

class LengthMismatch(HintEngineError, ValueError):
    pass


class EmptyCorpus(HintEngineError, ValueError):
    pass
