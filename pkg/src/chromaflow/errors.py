"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition or invariant."""


class ClipLoadError(ValueError):
    """Raised when a clip directory is malformed. Names the missing/bad file."""


class ConfigurationError(RuntimeError):
    """Raised when a training stage or CLI call is missing a prerequisite."""
