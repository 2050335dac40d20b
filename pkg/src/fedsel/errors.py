"""Exception taxonomy shared across the package."""


class FedselError(Exception):
    """Base class for all errors raised by fedsel."""


class ConfigurationError(FedselError, ValueError):
    """Invalid settings: bad field values, unknown config keys, or a corpus
    too small for the requested partition."""


class ShapeError(FedselError, ValueError):
    """Array dimensions or parameter manifests do not line up."""


class DataError(FedselError, ValueError):
    """Bad sample data: empty splits, labels out of range."""


class ProtocolError(FedselError, RuntimeError):
    """Federation protocol violation: missing updates, mismatched reports."""
