"""Exception hierarchy shared across the package.

Exit-code mapping for the CLI lives in ``uvhedge.cli``; keep new exception
types derived from one of the three mid-level classes so they map cleanly.
"""


class UvhedgeError(Exception):
    """Base class for all package errors."""


class ConfigError(UvhedgeError):
    """Invalid configuration or malformed instance data."""


class DomainError(ConfigError):
    """Numerical argument outside the mathematical domain (S <= 0, vol <= 0, ...)."""


class CapabilityError(UvhedgeError):
    """A requested route/derivative is not available for the given instrument."""

    def __init__(self, message: str, missing: str | None = None):
        super().__init__(message)
        self.missing = missing


class DegenerateVegaError(CapabilityError):
    """Traded-option vega below the numerical floor; hedge ratios undefined."""


class InvariantError(UvhedgeError):
    """A mathematical invariant that must hold was violated at runtime."""


class OracleFailure(UvhedgeError):
    """An independent verification oracle failed to converge (inconclusive, not a pass)."""
