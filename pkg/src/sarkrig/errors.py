"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ValidationError -> 2,
NumericalError -> 3, OSError -> 4.
"""


class SarKrigError(Exception):
    """Base class for all package errors."""


class ValidationError(SarKrigError):
    """Invalid inputs: shapes, ranges, schemas, file formats."""


class NumericalError(SarKrigError):
    """Numerical failure: singular or non-SPD systems, failed factorizations."""
