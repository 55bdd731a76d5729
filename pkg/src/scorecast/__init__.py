"""Score-driven density forecasting: estimation, pooling, and testing.

The package estimates forecasting models by maximizing out-of-sample
relevant proper scoring rules (log score, CRPS, censored log score,
quantile score), combines models into linear pools with score-optimal
weights, and provides the matching diagnostics: walk-forward score
matrices, equal-predictive-ability tests, break-even sample sizes, and
sampling densities of average scores.

Typical entry points:

* :func:`simulate` draws sample paths from the bundled processes.
* :func:`optimal_score_estimate` fits one model family under one rule.
* :func:`single_model_experiment` / :func:`pool_experiment` produce
  walk-forward score matrices.
* :func:`gw_statistic`, :func:`tau_star_curve`, and
  :func:`score_density_simulation` quantify the differences.

The ``scorecast`` CLI drives the same machinery from TOML configs.
"""

from .dgp import (
    Arma11,
    GarchT,
    GaussianArch1,
    NormalMixture,
    ReturnSeries,
    StdNormal,
    StudentT,
    mixture_moments,
    simulate,
)
from .errors import (
    BoundaryWarning,
    ConfigError,
    CovarianceError,
    DegenerateSampleError,
    ExperimentError,
    InsufficientHistoryError,
    OptimizationFailure,
    ParameterError,
    ParseError,
    ScorecastError,
    ShapeError,
)
from .evaluation import (
    CoherenceVerdict,
    ScoreMatrix,
    coherence_verdict,
    pool_experiment,
    render_table,
    single_model_experiment,
)
from .inference import (
    GwResult,
    SandwichCovariance,
    ScoreDensitySample,
    TauStarCurve,
    gw_statistic,
    kde_curve,
    sandwich_covariance,
    score_density_simulation,
    tau_star_curve,
    tau_star_from_matrix,
)
from .models import (
    FAMILIES,
    ModelFamily,
    PredictiveLaw,
    get_family,
    one_step_predictive,
    pool_predictive,
)
from .optimizer import (
    OptimizationReport,
    optimal_pool_weights,
    optimal_score_estimate,
    window_criterion,
)
from .scores import LOG_FLOOR, Region, ScoringRule, resolve_region
from .dataio import SeriesSummary, load_returns_csv, summarize, write_returns_csv
from .config import ExperimentConfig, load_config, parse_config, validate_config

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # processes
    "GaussianArch1",
    "GarchT",
    "Arma11",
    "StdNormal",
    "StudentT",
    "NormalMixture",
    "ReturnSeries",
    "simulate",
    "mixture_moments",
    # scoring rules
    "ScoringRule",
    "Region",
    "resolve_region",
    "LOG_FLOOR",
    # model families
    "ModelFamily",
    "PredictiveLaw",
    "FAMILIES",
    "get_family",
    "one_step_predictive",
    "pool_predictive",
    # estimation
    "OptimizationReport",
    "optimal_score_estimate",
    "optimal_pool_weights",
    "window_criterion",
    # experiments
    "ScoreMatrix",
    "CoherenceVerdict",
    "single_model_experiment",
    "pool_experiment",
    "coherence_verdict",
    "render_table",
    # inference
    "SandwichCovariance",
    "sandwich_covariance",
    "ScoreDensitySample",
    "score_density_simulation",
    "kde_curve",
    "GwResult",
    "gw_statistic",
    "TauStarCurve",
    "tau_star_curve",
    "tau_star_from_matrix",
    # data and configuration
    "SeriesSummary",
    "load_returns_csv",
    "write_returns_csv",
    "summarize",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "validate_config",
    # errors
    "ScorecastError",
    "ParameterError",
    "ShapeError",
    "ParseError",
    "ConfigError",
    "InsufficientHistoryError",
    "DegenerateSampleError",
    "OptimizationFailure",
    "ExperimentError",
    "CovarianceError",
    "BoundaryWarning",
]
