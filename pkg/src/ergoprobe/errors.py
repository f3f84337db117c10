"""Shared exception types."""


class BasisMismatchError(ValueError):
    """Two objects that must live on the same basis do not."""


class DimensionCapError(ValueError):
    """Requested Hilbert-space dimension exceeds the configured cap."""


class FitError(RuntimeError):
    """A curve fit failed to converge or was rejected."""


class CrossoverUndefinedError(RuntimeError):
    """Linear-to-quadratic crossover undefined (non-positive fit coefficients)."""
