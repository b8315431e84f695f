"""Exception types shared across the package."""


class RnpmError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(RnpmError):
    """Invalid or mismatched Hilbert-space dimensions."""


class CutoffError(RnpmError):
    """Fock truncation too small for the requested coherent amplitude."""

    def __init__(self, message: str, required_cutoff: int):
        super().__init__(message)
        self.required_cutoff = required_cutoff


class ConfigError(RnpmError):
    """Invalid physical or run configuration."""


class IntegratorError(RnpmError):
    """Numerical-accuracy guard tripped (trace drift, norm growth, ...)."""


class ConsistencyError(RnpmError):
    """An internal invariant of the protocol failed (signals a logic bug)."""
