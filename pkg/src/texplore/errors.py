"""Exception types shared across the package."""

from __future__ import annotations


class DimensionError(ValueError):
    """Array arguments have inconsistent or invalid shapes."""


class DataError(ValueError):
    """Numeric data is unusable (NaN/inf, wrong dtype, empty where forbidden)."""


class DomainError(ValueError):
    """A scalar argument or derived quantity left its admissible domain."""


class GridError(ValueError):
    """A frequency is off the DFT grid, duplicated, or outside [0, 1)."""


class StabilityError(ValueError):
    """A system violates a stability or controllability requirement."""


class ResolventError(ValueError):
    """A frequency-response matrix is singular at a requested frequency."""


class ResourceError(RuntimeError):
    """A computation would exceed the configured memory or size budget."""


class NumericalError(RuntimeError):
    """An iterative computation failed to reach its tolerance."""


class InfeasibleError(RuntimeError):
    """A feasibility problem admits no solution.

    Attributes
    ----------
    block : str
        Name of the constraint block with the most negative margin,
        empty when unknown.
    margins : dict
        Per-block minimum eigenvalues at the best point found.
    """

    def __init__(self, message: str, block: str = "", margins: dict | None = None):
        super().__init__(message)
        self.block = block
        self.margins = margins or {}


class ConfigError(ValueError):
    """A run configuration is malformed or incomplete."""
