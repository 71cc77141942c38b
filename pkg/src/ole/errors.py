"""Exception types shared across the package.

The CLI maps ValidationError (and subclasses) to exit code 2 and
NumericError to exit code 3.
"""


class OleError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(OleError):
    """Invalid input data, parameters, or configuration."""


class FormatError(ValidationError):
    """Malformed file content. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TruncatedFileError(FormatError):
    """File ended before the payload declared in its header."""


class LabelCountError(FormatError):
    """Label block size disagrees with the row count."""


class NonFiniteValueError(ValidationError):
    """A matrix contains NaN or infinity. ``row`` names the first bad row."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


class ZeroRowError(ValidationError):
    """A row with zero norm has no direction. ``row`` names the offender."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


class DimensionMismatchError(ValidationError):
    """Two inputs disagree on embedding dimensionality."""


class NumericError(OleError):
    """Numerical failure during fitting or scoring (degenerate data)."""
