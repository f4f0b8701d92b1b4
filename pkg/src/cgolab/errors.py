"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""


class SolverError(RuntimeError):
    """Raised when a linear or Newton solve fails to produce a usable result."""
