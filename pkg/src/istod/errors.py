"""Exception hierarchy shared across the engine."""


class IstodError(Exception):
    """Base class for all engine errors."""


class ConfigurationError(IstodError):
    """Bad wiring: mismatched domains, unknown slots, missing databases."""


class ContractViolationError(IstodError):
    """A move was invoked with its precondition unmet."""


class MoveError(IstodError):
    """A dialogue-move procedure failed; carries the backend diagnostic."""

    def __init__(self, message: str, *, diagnostic: str | None = None):
        super().__init__(message)
        self.diagnostic = diagnostic


class ExtractionError(MoveError):
    """The extraction backend returned output that could not be parsed."""


class BackendError(MoveError):
    """Transport, auth or timeout failure while talking to a backend."""


class ProtocolError(IstodError):
    """Session advanced out of protocol (input when not awaited, or vice versa)."""


class IngestError(IstodError):
    """Malformed or missing dataset asset; names the offending record."""


class EvalError(IstodError):
    """Evaluation harness failure (missing annotations, empty report sets)."""
