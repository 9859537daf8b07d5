"""Errors raised by the gbsk library."""


class GBSKError(Exception):
    """Base class for all gbsk errors."""


class DatasetFormatError(GBSKError):
    """A dataset file could not be parsed or failed validation.

    ``line`` carries the 1-based file line number (CSV) or 0-based row
    index (binary) when one can be attributed.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class IndivisibleBallError(GBSKError):
    """A terminal ball: it cannot be bisected into two nonempty children."""


class InsufficientBallsError(GBSKError):
    """Fewer balls are available than the number of peaks requested."""
