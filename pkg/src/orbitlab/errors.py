"""Shared exception types."""


class OrbitLabError(Exception):
    pass


class ScheduleError(OrbitLabError):
    """Schedule parameters violate the construction invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConfigError(OrbitLabError):
    """Config file cannot be parsed or encodes an invalid schedule."""


class SupportError(OrbitLabError):
    """A vector violates the support precondition of an operation."""


class TruncationError(OrbitLabError):
    """The truncation is too short for the requested computation."""


class NetSizeError(OrbitLabError):
    """A coefficient net would exceed the configured enumeration cap."""


class ProfileError(OrbitLabError):
    """Operation requires a different fan-polynomial profile."""


class PreconditionError(OrbitLabError):
    """Certificate precondition fails; the input vector is refused."""
