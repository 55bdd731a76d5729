"""Score-criterion optimization for model parameters and pool weights.

The estimation criterion for a data window y_1..y_n is the average
one-step-ahead score of the observations y_2..y_n, each forecast from
the history preceding it.  Parameters are searched on an unconstrained
scale (logs for positive parameters, logits for bounded ones, a
log-ratio map for simplex weights) by Nelder-Mead simplex search with
jittered multi-start.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy import optimize, special

from .dgp import ReturnSeries
from .errors import BoundaryWarning, OptimizationFailure, ParameterError, ShapeError
from .models import ModelFamily, PredictiveLaw, _mixture_quantile
from .rng import substream
from .scores import LOG_FLOOR, ScoringRule, gaussian_scores

__all__ = [
    "OptimizationReport",
    "window_scores",
    "window_criterion",
    "optimal_score_estimate",
    "optimal_pool_weights",
    "simplex_to_unconstrained",
    "simplex_from_unconstrained",
    "to_unconstrained",
    "from_unconstrained",
]

_INTERIOR = 1e-8
_XATOL = 1e-8
_FATOL = 1e-10
_MAXITER = 2000
# Stand-in objective value when the criterion is non-finite.
_PENALTY = 1e300


# ---------------------------------------------------------------------------
# window criterion


def _window_values(data) -> np.ndarray:
    y = data.values if isinstance(data, ReturnSeries) else np.asarray(data, dtype=float)
    if y.ndim != 1:
        raise ShapeError(f"expected a 1-D data window, got shape {y.shape}")
    if y.size < 2:
        raise ShapeError(f"data window needs at least 2 observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ParameterError("data window contains non-finite values")
    return y


def window_scores(family: ModelFamily, theta, y, rule: ScoringRule) -> np.ndarray:
    """Per-observation scores over a window: entry t scores y[t+1]."""
    y = _window_values(y)
    mu, var = family.predictive_moments(np.asarray(theta, dtype=float), y)
    return gaussian_scores(rule, mu[:-1], var[:-1], y[1:])


def window_criterion(family: ModelFamily, theta, y, rule: ScoringRule) -> float:
    """Average window score; the quantity the estimator maximizes."""
    return float(np.mean(window_scores(family, theta, y, rule)))


# ---------------------------------------------------------------------------
# simplex transforms


def simplex_to_unconstrained(w) -> np.ndarray:
    """Map simplex weights to R^(n-1) via log-ratios against the last weight.

    Zero weights are nudged to an interior point (1e-8, renormalized)
    first, with a ``BoundaryWarning``.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.ndim != 1 or w.size < 1:
        raise ShapeError(f"simplex weights must be a 1-D vector, got shape {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-8:
        raise ParameterError(f"weights must lie on the probability simplex, got {w!r}")
    if np.any(w < _INTERIOR):
        warnings.warn(
            "zero or near-zero pool weight moved to the simplex interior",
            BoundaryWarning,
            stacklevel=2,
        )
        w = np.maximum(w, _INTERIOR)
        w = w / w.sum()
    return np.log(w[:-1] / w[-1])


def simplex_from_unconstrained(u) -> np.ndarray:
    """Inverse of :func:`simplex_to_unconstrained` (softmax with a pivot)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    z = np.concatenate([u, [0.0]])
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


def to_unconstrained(domain: Union[ModelFamily, str], values) -> np.ndarray:
    """Transform natural parameters (or weights, domain="simplex") to R^d."""
    if isinstance(domain, str):
        if domain != "simplex":
            raise ParameterError(f"unknown transform domain {domain!r}")
        return simplex_to_unconstrained(values)
    return domain.to_unconstrained(values)


def from_unconstrained(domain: Union[ModelFamily, str], values) -> np.ndarray:
    """Inverse of :func:`to_unconstrained`."""
    if isinstance(domain, str):
        if domain != "simplex":
            raise ParameterError(f"unknown transform domain {domain!r}")
        return simplex_from_unconstrained(values)
    return domain.from_unconstrained(values)


# ---------------------------------------------------------------------------
# Nelder-Mead driver


@dataclass(frozen=True)
class OptimizationReport:
    """Outcome of a criterion maximization.

    ``argmax`` is on the natural scale (parameters or weights),
    ``value`` is the achieved criterion, ``iterations`` counts simplex
    iterations summed over restarts, and ``restarts`` the number of
    starts actually run.
    """

    argmax: np.ndarray
    value: float
    iterations: int
    converged: bool
    restarts: int


def _maximize(
    objective: Callable[[np.ndarray], float],
    u0: np.ndarray,
    restarts: int,
    seed: int,
    stream: str,
    jitter: float = 0.5,
) -> tuple[np.ndarray, float, int, bool, int]:
    """Run Nelder-Mead from ``u0`` and jittered copies; keep the best max.

    Ties within numerical noise resolve to the start closest to ``u0``.
    Returns (u_best, value, total_iterations, converged, restarts_run).
    """

    def negated(u: np.ndarray) -> float:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            value = objective(u)
        return -value if np.isfinite(value) else _PENALTY

    inits = [np.asarray(u0, dtype=float)]
    if restarts > 1:
        rng = substream(seed, stream)
        for _ in range(restarts - 1):
            inits.append(u0 + jitter * rng.standard_normal(u0.size))

    best_u, best_value, best_dist, best_ok = None, -np.inf, np.inf, False
    total_iter = 0
    for start in inits:
        res = optimize.minimize(
            negated,
            start,
            method="Nelder-Mead",
            options={
                "xatol": _XATOL,
                "fatol": _FATOL,
                "maxiter": _MAXITER,
                "maxfev": 4 * _MAXITER,
            },
        )
        total_iter += int(res.nit)
        value = -float(res.fun)
        dist = float(np.linalg.norm(res.x - u0))
        better = value > best_value + 1e-12 * (1.0 + abs(best_value))
        tied = abs(value - best_value) <= 1e-12 * (1.0 + abs(best_value))
        if best_u is None or (res.success and not best_ok):
            take = True
        elif res.success == best_ok:
            take = better or (tied and dist < best_dist)
        else:  # candidate failed, incumbent converged
            take = False
        if take:
            best_u, best_value, best_dist, best_ok = res.x, value, dist, bool(res.success)
    return best_u, best_value, total_iter, best_ok, len(inits)


def optimal_score_estimate(
    family: ModelFamily,
    data,
    rule: ScoringRule,
    init=None,
    *,
    restarts: int = 5,
    seed: int = 0,
) -> OptimizationReport:
    """Maximize the average window score over the family's parameters.

    Args:
        family: model family to fit.
        data: observation window (values or ``ReturnSeries``).
        rule: scoring rule; censored rules must carry a resolved region.
        init: optional starting parameters on the natural scale; defaults
            to a moment-based start.  Restarts jitter around it.
        restarts: number of Nelder-Mead starts (1 = warm start only).
        seed: seed for the jitter stream.

    Raises:
        OptimizationFailure: when no restart converges; the best
            incumbent is attached to the exception.
    """
    y = _window_values(data)
    if not rule.resolved:
        raise ParameterError(f"rule {rule.label!r} needs a resolved region before fitting")
    theta0 = family.validate(init) if init is not None else family.default_init(y)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        u0 = family.to_unconstrained(theta0)

    def objective(u: np.ndarray) -> float:
        theta = family.from_unconstrained(u)
        mu, var = family.predictive_moments(theta, y)
        return float(np.mean(gaussian_scores(rule, mu[:-1], var[:-1], y[1:])))

    u, value, iters, ok, used = _maximize(objective, u0, restarts, seed, f"fit:{family.name}:{rule.label}")
    report = OptimizationReport(
        argmax=family.from_unconstrained(u),
        value=value,
        iterations=iters,
        converged=ok,
        restarts=used,
    )
    if not ok:
        raise OptimizationFailure(
            f"no Nelder-Mead restart converged fitting {family.name} under {rule.label}",
            report=report,
        )
    return report


# ---------------------------------------------------------------------------
# pool-weight criterion


class PoolScorer:
    """Precomputed scoring of a weighted pool over a fixed target window.

    Component predictive laws are fixed; only the pool weights move
    during optimization, so everything weight-independent (component
    densities, tail masses, absolute moments) is computed once.
    """

    def __init__(self, means: np.ndarray, variances: np.ndarray, y: np.ndarray,
                 rule: ScoringRule, factors: np.ndarray | None = None,
                 parents: np.ndarray | None = None, n_pool: int | None = None):
        means = np.asarray(means, dtype=float)
        variances = np.asarray(variances, dtype=float)
        y = np.asarray(y, dtype=float)
        if means.ndim != 2 or means.shape != variances.shape or y.shape != (means.shape[0],):
            raise ShapeError(
                f"PoolScorer: incompatible shapes {means.shape}, {variances.shape}, {y.shape}"
            )
        if not rule.resolved:
            raise ParameterError(f"rule {rule.label!r} needs a resolved region")
        T, K = means.shape
        self.rule = rule
        self.y = y
        self.means = means
        self.variances = variances
        # Sub-component weight factors and their parent pool slot.
        self.factors = np.ones((T, K)) if factors is None else np.asarray(factors, float)
        self.parents = np.arange(K) if parents is None else np.asarray(parents, int)
        self.n_pool = K if n_pool is None else int(n_pool)
        sd = np.sqrt(variances)

        if rule.kind in ("ls", "cls"):
            z = (y[:, None] - means) / sd
            with np.errstate(divide="ignore"):
                log_f = np.log(self.factors)
            self._logpdf = -0.5 * (np.log(2.0 * np.pi * variances) + z * z) + log_f
            if rule.kind == "cls":
                region = rule.region
                if region.side == "lower":
                    tail = special.log_ndtr((means - region.threshold) / sd)
                else:
                    tail = special.log_ndtr((region.threshold - means) / sd)
                self._logtail = tail + log_f
                self._inside = region.contains(y)
        elif rule.kind == "crps":
            from .scores import _abs_moment

            a1 = _abs_moment(y[:, None] - means, variances) * self.factors
            diff = means[:, :, None] - means[:, None, :]
            svar = variances[:, :, None] + variances[:, None, :]
            a2 = _abs_moment(diff, svar) * self.factors[:, :, None] * self.factors[:, None, :]
            n = self.n_pool
            self._b1 = np.zeros((T, n))
            self._c2 = np.zeros((T, n, n))
            for k in range(n):
                cols_k = self.parents == k
                self._b1[:, k] = a1[:, cols_k].sum(axis=1)
                for l in range(n):
                    cols_l = self.parents == l
                    self._c2[:, k, l] = a2[:, cols_k][:, :, cols_l].sum(axis=(1, 2))

    @classmethod
    def from_laws(cls, components: Sequence[Sequence[PredictiveLaw]], ys,
                  rule: ScoringRule) -> "PoolScorer":
        """Build from a [time x component] matrix of predictive laws."""
        T = len(components)
        if T == 0:
            raise ShapeError("PoolScorer: empty component matrix")
        n = len(components[0])
        if n == 0:
            raise ShapeError("PoolScorer: need at least one pool component")
        sizes = [components[0][k].n_components for k in range(n)]
        cols: list[tuple[int, int]] = []
        for k in range(n):
            cols.extend((k, j) for j in range(sizes[k]))
        K = len(cols)
        means = np.empty((T, K))
        variances = np.empty((T, K))
        factors = np.empty((T, K))
        for t, row in enumerate(components):
            if len(row) != n:
                raise ShapeError(f"PoolScorer: row {t} has {len(row)} components, expected {n}")
            for c, (k, j) in enumerate(cols):
                law = row[k]
                if law.n_components != sizes[k]:
                    raise ShapeError(
                        f"PoolScorer: component {k} changes its mixture size at row {t}"
                    )
                means[t, c] = law.means[j]
                variances[t, c] = law.variances[j]
                factors[t, c] = law.weights[j]
        parents = np.array([k for k, _ in cols])
        return cls(means, variances, np.asarray(ys, float), rule, factors, parents, n)

    def _flat_weights(self, w: np.ndarray) -> np.ndarray:
        return self.factors * w[self.parents]

    def per_observation(self, w) -> np.ndarray:
        """Per-observation scores of the pooled forecast with weights ``w``."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_pool,):
            raise ShapeError(f"PoolScorer: expected {self.n_pool} weights, got shape {w.shape}")
        rule = self.rule
        if rule.kind in ("ls", "cls"):
            with np.errstate(divide="ignore"):
                log_w = np.log(w[self.parents])
            inside_val = np.maximum(
                special.logsumexp(self._logpdf + log_w, axis=1), LOG_FLOOR
            )
            if rule.kind == "ls":
                return inside_val
            outside_val = np.maximum(
                special.logsumexp(self._logtail + log_w, axis=1), LOG_FLOOR
            )
            return np.where(self._inside, inside_val, outside_val)
        if rule.kind == "crps":
            term1 = self._b1 @ w
            term2 = 0.5 * np.einsum("k,l,tkl->t", w, w, self._c2)
            return -(term1 - term2)
        # quantile score: per-t mixture quantile at the rule level
        u = self._flat_weights(w)
        q = _mixture_quantile(
            np.full(self.y.shape[0], self.rule.level), u, self.means, self.variances
        )
        return (self.y - q) * ((self.y <= q).astype(float) - self.rule.level)

    def criterion(self, w) -> float:
        return float(np.mean(self.per_observation(w)))


def optimal_pool_weights(
    components: Sequence[Sequence[PredictiveLaw]],
    ys,
    rule: ScoringRule,
    init=None,
    *,
    restarts: int = 5,
    seed: int = 0,
) -> OptimizationReport:
    """Maximize the average pooled score over simplex weights.

    Args:
        components: [time x component] matrix of predictive laws.
        ys: realizations aligned with the rows of ``components``.
        rule: scoring rule (resolved, for censored rules).
        init: starting weights; defaults to the uniform vector.
        restarts: Nelder-Mead starts.
        seed: seed for the jitter stream.
    """
    ys = np.asarray(ys, dtype=float)
    if len(components) == 0 or ys.shape != (len(components),):
        raise ShapeError(
            f"optimal_pool_weights: {len(components)} rows but realizations {ys.shape}"
        )
    scorer = PoolScorer.from_laws(components, ys, rule)
    n = scorer.n_pool
    if init is None:
        w0 = np.full(n, 1.0 / n)
    else:
        w0 = np.atleast_1d(np.asarray(init, dtype=float))
        if w0.shape != (n,):
            raise ShapeError(f"optimal_pool_weights: init has shape {w0.shape}, expected ({n},)")
    if n == 1:
        w = np.array([1.0])
        return OptimizationReport(
            argmax=w, value=scorer.criterion(w), iterations=0, converged=True, restarts=0
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        u0 = simplex_to_unconstrained(w0)

    def objective(u: np.ndarray) -> float:
        return scorer.criterion(simplex_from_unconstrained(u))

    u, value, iters, ok, used = _maximize(objective, u0, restarts, seed, f"pool:{rule.label}")
    report = OptimizationReport(
        argmax=simplex_from_unconstrained(u),
        value=value,
        iterations=iters,
        converged=ok,
        restarts=used,
    )
    if not ok:
        raise OptimizationFailure(
            f"no Nelder-Mead restart converged fitting pool weights under {rule.label}",
            report=report,
        )
    return report
