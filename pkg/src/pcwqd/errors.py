"""Exception types raised by the fitters and solvers."""


class PcwqdError(Exception):
    """Base class for all package errors."""


class FitError(PcwqdError):
    """A fitter could not produce a usable estimate."""


class NonConvergence(FitError):
    pass


class IllConditioned(FitError):
    pass


class InsufficientCounts(FitError):
    pass


class InsufficientSpan(FitError):
    """Data do not cover the region that identifies the fitted parameters."""


class QuadratureFailure(PcwqdError):
    pass


class Unreachable(PcwqdError):
    """Requested target lies outside the attainable range."""


class ValidationError(PcwqdError):
    """Malformed input file, config key or experiment spec."""
