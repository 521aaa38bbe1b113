"""Exception hierarchy.

Errors split into two groups so the command line can map them onto exit
codes: ``ValidationError`` for bad arguments or configuration (exit 2)
and ``DataError`` for problems with the supplied data (exit 3).
"""


class MurphyTestError(Exception):
    """Base class for all package errors."""


class ValidationError(MurphyTestError, ValueError):
    """Invalid argument, parameter or configuration."""


class DataError(MurphyTestError, ValueError):
    """Problem with input data or with a computation driven by it."""


class InvalidArgumentError(ValidationError):
    pass


class SpecError(ValidationError):
    """Inconsistent mixture or grid specification."""


class RangeError(ValidationError):
    """Integration range does not cover the required interval."""


class PreconditionError(ValidationError):
    pass


class DomainError(DataError):
    """Value outside the domain of a loss family."""


class EmptyInputError(DataError):
    pass


class SchemaError(DataError):
    pass


class ParseError(DataError):
    pass


class DegenerateVarianceError(DataError):
    pass


class NumericalDegeneracyError(DataError):
    pass


class SingularDesignError(DataError):
    pass


class OptimizationError(DataError):
    pass


class PathOverflowError(DataError):
    """Recursive forecast path became non-finite."""
