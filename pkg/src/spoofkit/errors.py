"""Exception types shared across the toolkit."""


class SpoofkitError(Exception):
    """Base class for all toolkit-specific errors."""


class ConfigError(SpoofkitError):
    """Invalid configuration: bad fields, mismatched spec/weights, duplicate targets."""


class FormatError(SpoofkitError):
    """Malformed or unsupported on-disk data (SPWT weights, PNG, IDX)."""


class TransportError(SpoofkitError):
    """I/O failure talking to a remote oracle (connect, timeout, broken pipe)."""

    def __init__(self, message: str, request_id: int | None = None):
        super().__init__(message)
        self.request_id = request_id


class ProtocolError(SpoofkitError):
    """Well-transported but invalid wire traffic (bad frame, id mismatch, bad probs)."""


class NotFoundError(SpoofkitError):
    """A requested elite, file, or trajectory does not exist."""


class CapacityError(SpoofkitError):
    """Not enough source material (e.g. fooling images) to build the requested artifact."""


class TrainingScopeError(SpoofkitError):
    """The trainable part of a network contains layers the dense trainer cannot handle."""
