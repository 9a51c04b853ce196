"""Weakly confined planar Coulomb gases, their outlier limits, and random
polynomial zeros: finite-N kernels, limit-kernel oracles, exact samplers,
and the statistics connecting them."""

__version__ = "0.1.0"

from .errors import (
    JelliumError,
    ValidationError,
    QuadratureError,
    ConditioningError,
    EnvelopeError,
    TruncationError,
)

__all__ = [
    "JelliumError",
    "ValidationError",
    "QuadratureError",
    "ConditioningError",
    "EnvelopeError",
    "TruncationError",
    "__version__",
]
