"""Exception hierarchy.

Every error raised by the package derives from :class:`JitCalibError`; most
also derive from :class:`ValueError` so callers treating bad input generically
keep working.
"""


class JitCalibError(Exception):
    """Base class for all package errors."""


class SchemaError(JitCalibError, ValueError):
    """A required column or feature is missing."""

    def __init__(self, missing, message=None):
        self.missing = missing
        super().__init__(message or f"missing required column: {missing!r}")


class ParseError(JitCalibError, ValueError):
    """A row could not be parsed. ``row`` is 1-based and counts data rows."""

    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class ValidationError(JitCalibError, ValueError):
    """A value parsed fine but violates a domain invariant."""


class ConfigurationError(JitCalibError, ValueError):
    """Invalid parameters (fold counts, bin counts, schemas...)."""


class UndefinedInputError(JitCalibError, ValueError):
    """The quantity is undefined for this input (empty set, single class...)."""


class FitError(JitCalibError, RuntimeError):
    """A model or calibrator cannot be fitted on the supplied data."""


class DegenerateSampleError(JitCalibError, ValueError):
    """A statistical test received a sample without variability."""


class ApplicabilityError(JitCalibError, ValueError):
    """A statistical test is not applicable at this sample size."""


class ComparisonError(JitCalibError, ValueError):
    """Two measurement tables do not share the same structure."""

    def __init__(self, unmatched, message=None):
        self.unmatched = list(unmatched)
        shown = ", ".join(map(str, self.unmatched[:10]))
        more = "" if len(self.unmatched) <= 10 else f" (+{len(self.unmatched) - 10} more)"
        super().__init__(message or f"measurement tables do not match; unmatched keys: {shown}{more}")
