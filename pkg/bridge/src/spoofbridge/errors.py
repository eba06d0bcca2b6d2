class BridgeError(Exception):
    """Base class for spoofbridge failures."""


class ConfigError(BridgeError):
    pass


class ExportError(BridgeError):
    """Checkpoint does not match the builtin LeNet layout."""
