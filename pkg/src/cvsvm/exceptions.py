class CvSvmError(Exception):
    """Base class for errors raised by cvsvm."""


class InvalidParameterError(CvSvmError, ValueError):
    pass


class NumericError(CvSvmError, ArithmeticError):
    """Non-finite data or a factorization that cannot be completed."""


class UndefinedMetricError(CvSvmError, ValueError):
    pass


class ContractViolation(CvSvmError):
    """Inputs that violate a structural precondition (e.g. mismatched masks)."""


class SearchError(CvSvmError):
    """A search failed; ``partial`` carries whatever was completed."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
