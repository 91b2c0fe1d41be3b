"""Exception types raised across the package."""


class SliceDriftError(Exception):
    """Base class for all errors raised by slicedrift."""


class SchemaError(SliceDriftError, ValueError):
    """A column is missing or a feature has the wrong kind."""


class DataParseError(SliceDriftError, ValueError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class DegenerateInputError(SliceDriftError, ValueError):
    """Input is too small or too uniform for the requested operation."""


class NoErrorsError(DegenerateInputError):
    """The dataset has no misclassified rows, so no weak slice exists."""


class EmptySliceSetError(SliceDriftError, ValueError):
    pass


class DistortionImpossibleError(SliceDriftError, RuntimeError):
    def __init__(self, column, attempts):
        super().__init__(
            f"could not change column {column!r} after {attempts} permutation attempts"
        )
        self.column = column
        self.attempts = attempts
