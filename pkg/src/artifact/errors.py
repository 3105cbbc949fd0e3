"""Exception hierarchy shared across the package."""


class ArtifactError(Exception):
    """Base class for package errors."""


class UndefinedQuotientError(ArtifactError, ZeroDivisionError):
    """A quotient was requested where its denominator vanishes."""


class RegimeError(ArtifactError, ValueError):
    """Parameters fall outside the regime where an operation is meaningful."""


class MembershipError(ArtifactError):
    """An iterate left the admissible set and could not be brought back."""


class ConfigError(ArtifactError, ValueError):
    """Malformed or unknown configuration entries."""


class ConvergenceError(ArtifactError):
    """A solver exhausted its budget without meeting its tolerances."""
