"""Python interface to the shlab singular-hyperbolic attractor library."""

from ._core import (
    NumericalError,
    ValidationError,
    __version__,
    acim,
    hyperbolic_time_frequency,
    lifted_average,
    lyapunov_spectrum,
    map_eval,
    monotone_alignment,
    quotient_map,
    sensitivity,
    simulate,
)

__all__ = [
    "NumericalError",
    "ValidationError",
    "__version__",
    "acim",
    "hyperbolic_time_frequency",
    "lifted_average",
    "lyapunov_spectrum",
    "map_eval",
    "monotone_alignment",
    "quotient_map",
    "sensitivity",
    "simulate",
]
