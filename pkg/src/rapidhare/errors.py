"""Exception types shared across the package."""


class DataError(Exception):
    """Malformed or inconsistent input: files, shapes, splits, parameters."""


class NumericError(Exception):
    """A numeric computation failed (non-finite likelihoods, degenerate decode)."""
