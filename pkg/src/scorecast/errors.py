"""Exception and warning types shared across the package."""


class ScorecastError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(ScorecastError, ValueError):
    """A parameter vector or specification violates its domain."""


class InsufficientHistoryError(ScorecastError, ValueError):
    """A conditional forecast was requested with too little history."""


class ShapeError(ScorecastError, ValueError):
    """Array arguments have incompatible lengths or dimensions."""


class DegenerateSampleError(ScorecastError, ValueError):
    """A sample is too short, constant, or otherwise unusable."""


class ParseError(ScorecastError, ValueError):
    """A data or configuration file could not be parsed.

    The message names the first offending line or field.
    """


class ConfigError(ScorecastError, ValueError):
    """An experiment configuration failed validation.

    Carries the full diagnostic list produced by ``validate``.
    """

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class OptimizationFailure(ScorecastError, RuntimeError):
    """No optimizer restart converged.

    The best incumbent report is attached so callers can decide whether
    to fall back or abort.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ExperimentError(ScorecastError, RuntimeError):
    """An experiment protocol could not be completed."""


class CovarianceError(ScorecastError, ValueError):
    """A covariance matrix is non-finite or not positive semidefinite."""


class BoundaryWarning(UserWarning):
    """A boundary value was nudged to the domain interior before a transform."""
