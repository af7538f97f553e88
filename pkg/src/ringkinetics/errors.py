"""Exception types shared across the package."""


class RingError(Exception):
    """Base class for all package-specific errors."""


class GridError(RingError):
    """Invalid grid construction parameters."""


class SupportError(RingError):
    """Initial data support would violate the required margins."""


class DomainError(RingError):
    """Evaluation requested outside the valid spatial domain."""


class CflError(RingError):
    """Time step incompatible with the unit-CFL characteristic update."""


class HistoryError(RingError):
    """Stored field history does not cover the requested reconstruction."""


class StepSizeError(RingError):
    """Integrator step size underflow."""


class BackendError(RingError):
    """A requested compute backend is unavailable or unknown."""


class PotentialTableError(RingError):
    """Tabulated confining potential fails its validity checks."""


class ConfigError(RingError):
    """One or more configuration violations.

    Collects *all* violations found during parsing/validation, not just the
    first, so a bad file can be fixed in one pass.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


class GridSupportWarning(UserWarning):
    """Momentum box smaller than the provable support bound for the run."""
