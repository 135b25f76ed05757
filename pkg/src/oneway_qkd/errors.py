"""Exception hierarchy shared by every layer of the stack."""


class QKDError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(QKDError, ValueError):
    """A physical or protocol parameter is outside its valid range."""


class InsufficientDataError(QKDError):
    """Not enough key material for the requested operation."""


class UndefinedQBERError(QKDError, ZeroDivisionError):
    """The QBER is undefined because the sifted rate is zero."""


class CalibrationError(QKDError):
    """A calibration anchor cannot be satisfied by the model."""


class DegenerateConfigurationError(QKDError):
    """The configuration never yields a positive key rate."""


class ProtocolError(QKDError):
    """The peer sent something the protocol does not allow."""


class FramingError(ProtocolError):
    """A byte buffer does not contain a complete frame."""


class TransportError(QKDError):
    """The message channel failed (closed, reset, refused)."""


class SessionAbort(QKDError):
    """The session was aborted by either party."""

    def __init__(self, reason: str, remote: bool = False):
        super().__init__(reason)
        self.reason = reason
        self.remote = remote


class ConfigError(QKDError):
    """Configuration text is malformed or violates an invariant."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
