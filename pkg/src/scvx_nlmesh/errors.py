"""Exception types raised by the library."""


class ScvxError(Exception):
    """Base class for all library errors."""


class DomainError(ScvxError, ValueError):
    """State outside the domain of a dynamics model (singularity, p <= 0, ...)."""


class PropagationError(ScvxError, RuntimeError):
    """Numerical integration failed; ``segments`` lists the offending segment indices."""

    def __init__(self, message, segments=()):
        super().__init__(message)
        self.segments = tuple(int(s) for s in segments)


class AssemblyError(ScvxError, ValueError):
    """Convex subproblem could not be assembled (shape mismatch, non-finite data)."""


class ConfigError(ScvxError, ValueError):
    """Invalid or unreadable configuration file."""
