"""Exception types shared across the package."""


class JelliumError(Exception):
    """Base class for all package errors."""


class ValidationError(JelliumError):
    """Invalid measure, parameters, or experiment configuration."""


class QuadratureError(JelliumError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Carries the tolerance that was actually achieved so callers can decide
    whether the result is still usable.
    """

    def __init__(self, message, achieved=None, requested=None):
        super().__init__(message)
        self.achieved = achieved
        self.requested = requested


class ConditioningError(JelliumError):
    """Orthonormalization produced a Gram matrix too far from the identity."""

    def __init__(self, message, residual=None, suggestion=None):
        super().__init__(message)
        self.residual = residual
        self.suggestion = suggestion


class EnvelopeError(JelliumError):
    """A certified rejection-sampling envelope was violated (indicates a bug
    or broken precondition, never silently tolerated)."""


class TruncationError(JelliumError):
    """A series truncation could not meet its tolerance within the term cap."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
