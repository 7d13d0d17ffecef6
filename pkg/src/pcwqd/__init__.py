"""Resonant-transmission spectroscopy of waveguide-coupled quantum emitters:
forward models, fitters and the analysis pipeline."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    FitError,
    IllConditioned,
    InsufficientCounts,
    InsufficientSpan,
    NonConvergence,
    PcwqdError,
    QuadratureFailure,
    Unreachable,
    ValidationError,
)

__all__ = [
    "__version__",
    "FitError",
    "IllConditioned",
    "InsufficientCounts",
    "InsufficientSpan",
    "NonConvergence",
    "PcwqdError",
    "QuadratureFailure",
    "Unreachable",
    "ValidationError",
]
