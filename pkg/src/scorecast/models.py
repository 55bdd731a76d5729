"""Predictive model families and their one-step-ahead laws.

Every family maps a parameter vector plus an observed history to a
Gaussian one-step predictive law; pools of families yield Gaussian
mixtures.  The key array convention, used throughout the package:

    mu, var = family.predictive_moments(theta, y)

returns arrays of the same length as ``y`` where entry ``i`` holds the
conditional moments of the forecast for ``y[i+1]`` given ``y[:i+1]``.
The final entry is the forecast for the not-yet-observed point after the
sample.  Recursions (GARCH variance, MA innovations) initialize at their
unconditional values at the start of the supplied history.
"""

from __future__ import annotations

import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import signal, special

from .dgp import ReturnSeries
from .errors import (
    BoundaryWarning,
    InsufficientHistoryError,
    ParameterError,
    ShapeError,
)

__all__ = [
    "PredictiveLaw",
    "ModelFamily",
    "IIDNormal",
    "Arch1",
    "Arch1FixedMean",
    "Garch11",
    "Ar1Normal",
    "Ma1Normal",
    "FAMILIES",
    "get_family",
    "one_step_predictive",
    "pool_predictive",
]

_INTERIOR = 1e-8
# Ceiling for positive-scale parameters: keeps exp-overflowed transform
# output finite so the result still validates.
_HUGE = 1e300
_LOG_2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# transform helpers (natural <-> unconstrained scale)


def _nudge(x: float, low: float, high: float, what: str) -> float:
    clipped = min(max(x, low), high)
    if clipped != x:
        warnings.warn(
            f"{what}={x!r} moved to the domain interior before transforming",
            BoundaryWarning,
            stacklevel=3,
        )
    return clipped


def _to_log(x: float, what: str) -> float:
    return float(np.log(_nudge(x, _INTERIOR, np.inf, what)))


def _to_logit(x: float, what: str) -> float:
    x = _nudge(x, _INTERIOR, 1.0 - _INTERIOR, what)
    return float(special.logit(x))


def _to_atanh(x: float, what: str) -> float:
    x = _nudge(x, -1.0 + _INTERIOR, 1.0 - _INTERIOR, what)
    return float(np.arctanh(x))


# ---------------------------------------------------------------------------
# predictive law


@dataclass(frozen=True)
class PredictiveLaw:
    """A finite Gaussian mixture used as a one-step predictive law.

    A single-component instance is an ordinary Gaussian forecast.  The
    CDF of any instance is continuous and strictly increasing, so
    quantiles are well defined at every level in (0, 1).
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        m = np.atleast_1d(np.asarray(self.means, dtype=float))
        v = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if not (w.shape == m.shape == v.shape) or w.ndim != 1:
            raise ShapeError(
                f"PredictiveLaw: mismatched component shapes {w.shape}, {m.shape}, {v.shape}"
            )
        if w.size == 0:
            raise ShapeError("PredictiveLaw: need at least one component")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
            raise ParameterError("PredictiveLaw: components must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-8:
            raise ParameterError(
                f"PredictiveLaw: weights must be a probability vector, got sum {w.sum()!r}"
            )
        if np.any(v <= 0):
            raise ParameterError("PredictiveLaw: variances must be positive")
        object.__setattr__(self, "weights", w / w.sum())
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @classmethod
    def gaussian(cls, mean: float, variance: float) -> "PredictiveLaw":
        return cls(np.array([1.0]), np.array([float(mean)]), np.array([float(variance)]))

    @property
    def n_components(self) -> int:
        return int(self.weights.size)

    def _z(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return (y[..., None] - self.means) / np.sqrt(self.variances)

    def logpdf(self, y) -> np.ndarray | float:
        z = self._z(y)
        comp = -0.5 * (_LOG_2PI + np.log(self.variances) + z * z)
        out = special.logsumexp(comp, axis=-1, b=self.weights)
        return float(out) if np.isscalar(y) or np.ndim(y) == 0 else out

    def pdf(self, y) -> np.ndarray | float:
        return np.exp(self.logpdf(y))

    def cdf(self, y) -> np.ndarray | float:
        out = special.ndtr(self._z(y)) @ self.weights
        return float(out) if np.isscalar(y) or np.ndim(y) == 0 else out

    def mean(self) -> float:
        return float(self.weights @ self.means)

    def variance(self) -> float:
        m = self.mean()
        return float(self.weights @ (self.variances + self.means**2) - m * m)

    def quantile(self, p) -> np.ndarray | float:
        """Inverse CDF, defined for levels strictly inside (0, 1)."""
        p_arr = np.atleast_1d(np.asarray(p, dtype=float))
        if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
            raise ParameterError(f"quantile: levels must lie in (0, 1), got {p!r}")
        if self.n_components == 1:
            out = self.means[0] + np.sqrt(self.variances[0]) * special.ndtri(p_arr)
        else:
            out = _mixture_quantile(
                p_arr, self.weights, self.means[None, :], self.variances[None, :]
            )
        return float(out[0]) if np.isscalar(p) or np.ndim(p) == 0 else out


def _mixture_quantile(
    p: np.ndarray, weights: np.ndarray, means: np.ndarray, variances: np.ndarray
) -> np.ndarray:
    """Vectorized Gaussian-mixture quantiles by safeguarded Newton steps.

    ``means``/``variances`` have shape (T, K) or (1, K); ``p`` has shape
    (T,) or (1,).  ``weights`` may be shared, shape (K,), or per-row,
    shape (T, K).  Returns one quantile per row.

    Component quantiles bracket the mixture quantile (the mixture CDF at
    min_k q_k is at most p and at max_k q_k at least p), so every Newton
    step can fall back to bisection inside a valid bracket.
    """
    weights = np.asarray(weights, dtype=float)
    sd = np.sqrt(variances)
    comp_q = means + sd * special.ndtri(p)[..., None]
    lo = np.min(comp_q, axis=1)
    hi = np.max(comp_q, axis=1)
    if weights.ndim == 1:
        x0 = comp_q @ weights
    else:
        x0 = (comp_q * weights).sum(axis=1)
    lo, hi, p, x = np.broadcast_arrays(lo, hi, p, x0)
    lo, hi, x = lo.copy(), hi.copy(), x.copy()

    def cdf_pdf_at(xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = (xs[:, None] - means) / sd
        dens = np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * sd)
        if weights.ndim == 1:
            return special.ndtr(z) @ weights, dens @ weights
        return (special.ndtr(z) * weights).sum(axis=1), (dens * weights).sum(axis=1)

    scale = 1.0 + np.max(np.abs(np.concatenate([lo, hi])))
    for _ in range(80):
        cdf, pdf = cdf_pdf_at(x)
        err = cdf - p
        below = err < 0.0
        lo = np.where(below, x, lo)
        hi = np.where(below, hi, x)
        if np.max(np.abs(err)) < 1e-14 or np.max(hi - lo) < 1e-13 * scale:
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(pdf > 0.0, err / pdf, np.inf)
        candidate = x - step
        inside = (candidate > lo) & (candidate < hi)
        x = np.where(inside, candidate, 0.5 * (lo + hi))
    return x


# ---------------------------------------------------------------------------
# model families


class ModelFamily(ABC):
    """A parametric family of conditional Gaussian one-step forecasters."""

    name: str = ""
    param_names: tuple[str, ...] = ()

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def _check_len(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ShapeError(
                f"{self.name}: expected {self.n_params} parameters, got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise ParameterError(f"{self.name}: parameters must be finite, got {theta}")
        return theta

    @abstractmethod
    def validate(self, theta) -> np.ndarray:
        """Return ``theta`` as an array, raising ``ParameterError`` off-domain."""

    @abstractmethod
    def default_init(self, y: np.ndarray) -> np.ndarray:
        """A data-driven starting point for optimization."""

    @abstractmethod
    def to_unconstrained(self, theta) -> np.ndarray:
        ...

    @abstractmethod
    def from_unconstrained(self, u) -> np.ndarray:
        """Map an unconstrained vector into the family's domain.

        The result must satisfy ``validate`` for every finite ``u``, so
        implementations clip saturated transform outputs (``expit``/``tanh``
        rounding to an endpoint, ``exp`` underflowing to zero) back into
        the domain interior.
        """

    @abstractmethod
    def predictive_moments(self, theta, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One-step conditional means and variances (see module docstring)."""

    @abstractmethod
    def clip_to_domain(self, theta) -> np.ndarray:
        """Project an arbitrary vector onto the family's domain interior."""


class IIDNormal(ModelFamily):
    """iid Gaussian: constant mean and variance."""

    name = "iid_normal"
    param_names = ("mean", "variance")

    def validate(self, theta) -> np.ndarray:
        theta = self._check_len(theta)
        if theta[1] <= 0:
            raise ParameterError(f"{self.name}: variance must be positive, got {theta[1]}")
        return theta

    def default_init(self, y: np.ndarray) -> np.ndarray:
        return np.array([np.mean(y), max(np.var(y), _INTERIOR)])

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = self.validate(theta)
        return np.array([theta[0], _to_log(theta[1], "variance")])

    def from_unconstrained(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.clip_to_domain(np.array([u[0], np.exp(u[1])]))

    def predictive_moments(self, theta, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = len(y)
        return np.full(n, theta[0]), np.full(n, theta[1])

    def clip_to_domain(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.array([theta[0], np.clip(theta[1], _INTERIOR, _HUGE)])


class Arch1(ModelFamily):
    """Constant mean with first-order ARCH variance."""

    name = "arch1"
    param_names = ("mean", "omega", "alpha")

    def validate(self, theta) -> np.ndarray:
        theta = self._check_len(theta)
        if theta[1] <= 0:
            raise ParameterError(f"{self.name}: omega must be positive, got {theta[1]}")
        if not 0.0 <= theta[2] < 1.0:
            raise ParameterError(f"{self.name}: need 0 <= alpha < 1, got {theta[2]}")
        return theta

    def default_init(self, y: np.ndarray) -> np.ndarray:
        v = max(np.var(y), _INTERIOR)
        return np.array([np.mean(y), 0.8 * v, 0.1])

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = self.validate(theta)
        return np.array([theta[0], _to_log(theta[1], "omega"), _to_logit(theta[2], "alpha")])

    def from_unconstrained(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.clip_to_domain(np.array([u[0], np.exp(u[1]), special.expit(u[2])]))

    def predictive_moments(self, theta, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mu = np.full(len(y), theta[0])
        var = theta[1] + theta[2] * (y - theta[0]) ** 2
        return mu, var

    def clip_to_domain(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.array(
            [
                theta[0],
                np.clip(theta[1], _INTERIOR, _HUGE),
                np.clip(theta[2], 0.0, 1.0 - _INTERIOR),
            ]
        )


class Arch1FixedMean(ModelFamily):
    """ARCH(1) with the mean pinned at zero."""

    name = "arch1_fixed_mean"
    param_names = ("omega", "alpha")

    def validate(self, theta) -> np.ndarray:
        theta = self._check_len(theta)
        if theta[0] <= 0:
            raise ParameterError(f"{self.name}: omega must be positive, got {theta[0]}")
        if not 0.0 <= theta[1] < 1.0:
            raise ParameterError(f"{self.name}: need 0 <= alpha < 1, got {theta[1]}")
        return theta

    def default_init(self, y: np.ndarray) -> np.ndarray:
        v = max(np.mean(y**2), _INTERIOR)
        return np.array([0.8 * v, 0.1])

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = self.validate(theta)
        return np.array([_to_log(theta[0], "omega"), _to_logit(theta[1], "alpha")])

    def from_unconstrained(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.clip_to_domain(np.array([np.exp(u[0]), special.expit(u[1])]))

    def predictive_moments(self, theta, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(len(y)), theta[0] + theta[1] * y**2

    def clip_to_domain(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.array(
            [np.clip(theta[0], _INTERIOR, _HUGE), np.clip(theta[1], 0.0, 1.0 - _INTERIOR)]
        )


class Garch11(ModelFamily):
    """Constant mean with GARCH(1,1) variance.

    The variance recursion starts at its stationary value
    omega / (1 - alpha - beta) at the beginning of the supplied history.
    """

    name = "garch11"
    param_names = ("mean", "omega", "alpha", "beta")

    def validate(self, theta) -> np.ndarray:
        theta = self._check_len(theta)
        if theta[1] <= 0:
            raise ParameterError(f"{self.name}: omega must be positive, got {theta[1]}")
        if theta[2] < 0 or theta[3] < 0:
            raise ParameterError(f"{self.name}: alpha and beta must be nonnegative")
        if theta[2] + theta[3] >= 1.0:
            raise ParameterError(
                f"{self.name}: need alpha + beta < 1, got {theta[2] + theta[3]}"
            )
        return theta

    def default_init(self, y: np.ndarray) -> np.ndarray:
        v = max(np.var(y), _INTERIOR)
        return np.array([np.mean(y), 0.05 * v, 0.05, 0.90])

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = self.validate(theta)
        alpha, beta = theta[2], theta[3]
        total = alpha + beta
        share = 0.5 if total == 0.0 else alpha / total
        return np.array(
            [
                theta[0],
                _to_log(theta[1], "omega"),
                _to_logit(total, "alpha+beta"),
                _to_logit(share, "alpha share"),
            ]
        )

    def from_unconstrained(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        total = special.expit(u[2])
        share = special.expit(u[3])
        return self.clip_to_domain(
            np.array([u[0], np.exp(u[1]), total * share, total * (1.0 - share)])
        )

    def predictive_moments(self, theta, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mean, omega, alpha, beta = theta
        e2 = (np.asarray(y, dtype=float) - mean) ** 2
        v0 = omega / (1.0 - alpha - beta)
        # var[t] = omega + alpha e2[t] + beta var[t-1], seeded with var(-1) = v0,
        # run as a linear IIR filter for speed.
        var, _ = signal.lfilter(
            [1.0], [1.0, -beta], omega + alpha * e2, zi=np.array([beta * v0])
        )
        return np.full(len(y), mean), var

    def clip_to_domain(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        alpha = max(theta[2], 0.0)
        beta = max(theta[3], 0.0)
        total = alpha + beta
        if total >= 1.0:
            shrink = (1.0 - _INTERIOR) / total
            alpha, beta = alpha * shrink, beta * shrink
        return np.array([theta[0], np.clip(theta[1], _INTERIOR, _HUGE), alpha, beta])


class Ar1Normal(ModelFamily):
    """First-order Gaussian autoregression."""

    name = "ar1_normal"
    param_names = ("intercept", "slope", "variance")

    def validate(self, theta) -> np.ndarray:
        theta = self._check_len(theta)
        if abs(theta[1]) >= 1.0:
            raise ParameterError(f"{self.name}: need |slope| < 1, got {theta[1]}")
        if theta[2] <= 0:
            raise ParameterError(f"{self.name}: variance must be positive, got {theta[2]}")
        return theta

    def default_init(self, y: np.ndarray) -> np.ndarray:
        yc = y - np.mean(y)
        denom = float(yc @ yc)
        slope = float(yc[1:] @ yc[:-1]) / denom if denom > 0 else 0.0
        slope = np.clip(slope, -0.95, 0.95)
        resid_var = max((1.0 - slope**2) * np.var(y), _INTERIOR)
        return np.array([np.mean(y) * (1.0 - slope), slope, resid_var])

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = self.validate(theta)
        return np.array(
            [theta[0], _to_atanh(theta[1], "slope"), _to_log(theta[2], "variance")]
        )

    def from_unconstrained(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.clip_to_domain(np.array([u[0], np.tanh(u[1]), np.exp(u[2])]))

    def predictive_moments(self, theta, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mu = theta[0] + theta[1] * np.asarray(y, dtype=float)
        return mu, np.full(len(y), theta[2])

    def clip_to_domain(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.array(
            [
                theta[0],
                np.clip(theta[1], -1.0 + _INTERIOR, 1.0 - _INTERIOR),
                np.clip(theta[2], _INTERIOR, _HUGE),
            ]
        )


class Ma1Normal(ModelFamily):
    """Invertible first-order Gaussian moving average.

    Innovations are filtered out of the history with eta(-1) = 0, so the
    conditional mean for the step after ``y[i]`` is
    intercept + ma * eta[i].
    """

    name = "ma1_normal"
    param_names = ("intercept", "ma", "variance")

    def validate(self, theta) -> np.ndarray:
        theta = self._check_len(theta)
        if abs(theta[1]) >= 1.0:
            raise ParameterError(f"{self.name}: need |ma| < 1, got {theta[1]}")
        if theta[2] <= 0:
            raise ParameterError(f"{self.name}: variance must be positive, got {theta[2]}")
        return theta

    def default_init(self, y: np.ndarray) -> np.ndarray:
        return np.array([np.mean(y), 0.0, max(np.var(y), _INTERIOR)])

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = self.validate(theta)
        return np.array([theta[0], _to_atanh(theta[1], "ma"), _to_log(theta[2], "variance")])

    def from_unconstrained(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.clip_to_domain(np.array([u[0], np.tanh(u[1]), np.exp(u[2])]))

    def predictive_moments(self, theta, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        intercept, ma, variance = theta
        x = np.asarray(y, dtype=float) - intercept
        eta = signal.lfilter([1.0], [1.0, ma], x)
        return intercept + ma * eta, np.full(len(y), variance)

    def clip_to_domain(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.array(
            [
                theta[0],
                np.clip(theta[1], -1.0 + _INTERIOR, 1.0 - _INTERIOR),
                np.clip(theta[2], _INTERIOR, _HUGE),
            ]
        )


FAMILIES: dict[str, ModelFamily] = {
    fam.name: fam
    for fam in (IIDNormal(), Arch1(), Arch1FixedMean(), Garch11(), Ar1Normal(), Ma1Normal())
}


def get_family(name: str) -> ModelFamily:
    try:
        return FAMILIES[name]
    except KeyError:
        known = ", ".join(sorted(FAMILIES))
        raise ParameterError(f"unknown model family {name!r}; known families: {known}") from None


# ---------------------------------------------------------------------------
# public forecasting operations


def one_step_predictive(
    family: ModelFamily, theta, history: Union[ReturnSeries, np.ndarray, Sequence[float]]
) -> PredictiveLaw:
    """The forecast law for the observation following ``history``.

    Args:
        family: model family.
        theta: parameter vector on the natural scale.
        history: observed values ordered in time, at least one point.
    """
    theta = family.validate(theta)
    values = history.values if isinstance(history, ReturnSeries) else np.asarray(history, float)
    if values.ndim != 1:
        raise ShapeError(f"one_step_predictive: history must be 1-D, got shape {values.shape}")
    if values.size < 1:
        raise InsufficientHistoryError(
            f"one_step_predictive: {family.name} needs at least one observation"
        )
    mu, var = family.predictive_moments(theta, values)
    return PredictiveLaw.gaussian(mu[-1], var[-1])


def pool_predictive(components: Sequence[PredictiveLaw], weights) -> PredictiveLaw:
    """Linear opinion pool of predictive laws.

    The pooled density is exactly the weight-convex combination of the
    component densities.
    """
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if w.ndim != 1 or len(components) != w.size:
        raise ShapeError(
            f"pool_predictive: {len(components)} components but {w.size} weights"
        )
    if w.size == 0:
        raise ShapeError("pool_predictive: need at least one component")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-8:
        raise ParameterError(
            f"pool_predictive: weights must be a probability vector, got {w!r}"
        )
    w = w / w.sum()
    weights_out = np.concatenate([wk * c.weights for wk, c in zip(w, components)])
    means_out = np.concatenate([c.means for c in components])
    vars_out = np.concatenate([c.variances for c in components])
    return PredictiveLaw(weights_out, means_out, vars_out)
