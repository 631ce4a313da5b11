"""Exception taxonomy shared across the scanner."""


class ScannerError(Exception):
    """Base class for all scanner-raised errors."""


class InvalidParameterError(ScannerError):
    """A caller-supplied value violated an operation's precondition."""


class OracleError(ScannerError):
    """The model oracle failed: transport trouble, protocol violation or bad logits.

    ``partial`` may carry whatever stage evidence was collected before the
    failure, so batch callers can record it.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigError(ScannerError):
    """A manifest, config file or CLI flag combination is malformed."""


class MetricError(ScannerError):
    """A metric is undefined for the given inputs (e.g. single-class labels)."""


class ImageIOError(ScannerError):
    """An image file could not be read or written; message names the file."""
