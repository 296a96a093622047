"""Exception types shared across the package."""


class DegenerateDataError(ValueError):
    """Raised when an estimator denominator is (numerically) zero.

    Typical cause: a constant output sample, for which variance-ratio
    and CDF-ratio indices are undefined.
    """


class UsageError(ValueError):
    """Raised for invalid configuration or malformed input files."""
