"""Data-generating processes for the simulation studies.

Three families are supported:

* ``GaussianArch1``: y_t = s_t e_t with s_t^2 = c + a y_{t-1}^2 and
  Gaussian innovations.
* ``GarchT``: y_t = sqrt((nu-2)/nu) s_t e_t with
  s_t^2 = c + a y_{t-1}^2 + b s_{t-1}^2 and Student-t innovations; the
  scale factor makes the compound innovation unit-variance.
* ``Arma11``: y_t = c + ar y_{t-1} + ma e_{t-1} + e_t with an
  exchangeable innovation law (``ErrorDist``).

Simulations discard a burn-in prefix so the retained sample is drawn
from (approximately) the stationary law.  Recursions initialize at the
unconditional values: s_0^2 at the stationary variance, ARMA at its
stationary mean with e_0 = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ParameterError, ShapeError

__all__ = [
    "StdNormal",
    "StudentT",
    "NormalMixture",
    "ErrorDist",
    "GaussianArch1",
    "GarchT",
    "Arma11",
    "DgpSpec",
    "ReturnSeries",
    "simulate",
    "mixture_moments",
]

DEFAULT_BURN_IN = 1000


# ---------------------------------------------------------------------------
# innovation laws


@dataclass(frozen=True)
class StdNormal:
    """Standard normal innovations."""

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal(n)


@dataclass(frozen=True)
class StudentT:
    """Student-t innovations.

    With ``standardized=True`` draws are scaled by sqrt((nu-2)/nu) so the
    innovation variance is exactly one (requires nu > 2).
    """

    nu: float
    standardized: bool = True

    def __post_init__(self) -> None:
        if not np.isfinite(self.nu) or self.nu <= 0:
            raise ParameterError(f"StudentT: nu must be positive, got {self.nu}")
        if self.standardized and self.nu <= 2:
            raise ParameterError(
                f"StudentT: standardized draws need nu > 2, got {self.nu}"
            )

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        draws = rng.standard_t(self.nu, n)
        if self.standardized:
            draws = draws * np.sqrt((self.nu - 2.0) / self.nu)
        return draws


@dataclass(frozen=True)
class NormalMixture:
    """Two-component Gaussian mixture, component 1 with probability ``p``."""

    p: float
    mu1: float
    sigma1: float
    mu2: float
    sigma2: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"NormalMixture: p must lie in [0, 1], got {self.p}")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ParameterError("NormalMixture: component scales must be positive")
        for name in ("mu1", "sigma1", "mu2", "sigma2"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"NormalMixture: {name} must be finite")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # Draw the component labels before the normals so the stream layout
        # is fixed regardless of p.
        labels = rng.random(n) < self.p
        z = rng.standard_normal(n)
        return np.where(labels, self.mu1 + self.sigma1 * z, self.mu2 + self.sigma2 * z)


ErrorDist = Union[StdNormal, StudentT, NormalMixture]


def mixture_moments(dist: NormalMixture) -> tuple[float, float, float]:
    """Analytic (mean, variance, skewness) of a two-component normal mixture.

    Raises:
        TypeError: for any distribution other than ``NormalMixture``.
    """
    if not isinstance(dist, NormalMixture):
        raise TypeError(f"mixture_moments expects a NormalMixture, got {type(dist).__name__}")
    p, q = dist.p, 1.0 - dist.p
    mean = p * dist.mu1 + q * dist.mu2
    second = p * (dist.sigma1**2 + dist.mu1**2) + q * (dist.sigma2**2 + dist.mu2**2)
    variance = second - mean**2
    d1, d2 = dist.mu1 - mean, dist.mu2 - mean
    third_central = p * (d1**3 + 3.0 * d1 * dist.sigma1**2) + q * (
        d2**3 + 3.0 * d2 * dist.sigma2**2
    )
    skewness = third_central / variance**1.5
    return float(mean), float(variance), float(skewness)


# ---------------------------------------------------------------------------
# process specifications


@dataclass(frozen=True)
class GaussianArch1:
    """First-order ARCH with Gaussian innovations: s_t^2 = c + a y_{t-1}^2."""

    c: float
    a: float
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ParameterError(f"GaussianArch1: c must be positive, got {self.c}")
        if not 0.0 <= self.a < 1.0:
            raise ParameterError(f"GaussianArch1: need 0 <= a < 1, got {self.a}")
        if self.burn_in < 0:
            raise ParameterError("GaussianArch1: burn_in must be nonnegative")

    @property
    def unconditional_variance(self) -> float:
        return self.c / (1.0 - self.a)


@dataclass(frozen=True)
class GarchT:
    """GARCH(1,1) with unit-variance-scaled Student-t innovations."""

    c: float
    a: float
    b: float
    nu: float
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ParameterError(f"GarchT: c must be positive, got {self.c}")
        if self.a < 0 or self.b < 0:
            raise ParameterError("GarchT: a and b must be nonnegative")
        if self.a + self.b >= 1.0:
            raise ParameterError(
                f"GarchT: need a + b < 1 for stationarity, got {self.a + self.b}"
            )
        if self.nu <= 2:
            raise ParameterError(f"GarchT: nu must exceed 2, got {self.nu}")
        if self.burn_in < 0:
            raise ParameterError("GarchT: burn_in must be nonnegative")

    @property
    def unconditional_variance(self) -> float:
        return self.c / (1.0 - self.a - self.b)


@dataclass(frozen=True)
class Arma11:
    """ARMA(1,1) with an arbitrary iid innovation law."""

    intercept: float
    ar: float
    ma: float
    error: ErrorDist = field(default_factory=StdNormal)
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self) -> None:
        if abs(self.ar) >= 1.0:
            raise ParameterError(f"Arma11: need |ar| < 1 for stationarity, got {self.ar}")
        for name in ("intercept", "ma"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"Arma11: {name} must be finite")
        if self.burn_in < 0:
            raise ParameterError("Arma11: burn_in must be nonnegative")

    @property
    def stationary_mean(self) -> float:
        return self.intercept / (1.0 - self.ar)


DgpSpec = Union[GaussianArch1, GarchT, Arma11]


# ---------------------------------------------------------------------------
# simulated output container


@dataclass(frozen=True)
class ReturnSeries:
    """An ordered series of (typically daily, percentage) returns.

    ``dates`` are optional ISO-8601 strings kept only for reporting.
    """

    values: np.ndarray
    dates: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ShapeError(f"ReturnSeries: values must be 1-D, got shape {values.shape}")
        if values.size < 2:
            raise ShapeError(f"ReturnSeries: need at least 2 observations, got {values.size}")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ParameterError(f"ReturnSeries: non-finite value at position {bad}")
        object.__setattr__(self, "values", values)
        if self.dates is not None:
            dates = tuple(str(d) for d in self.dates)
            if len(dates) != values.size:
                raise ShapeError(
                    f"ReturnSeries: {len(dates)} dates for {values.size} values"
                )
            object.__setattr__(self, "dates", dates)

    def __len__(self) -> int:
        return int(self.values.size)


# ---------------------------------------------------------------------------
# simulation

Seed = Union[int, np.random.SeedSequence, np.random.Generator]


def _as_generator(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def simulate(spec: DgpSpec, T: int, seed: Seed) -> ReturnSeries:
    """Draw a length-``T`` sample path from ``spec`` after burn-in.

    The same ``(spec, T, seed)`` triple always returns a bit-identical
    series.

    Args:
        spec: process specification.
        T: number of retained observations, at least 2.
        seed: integer seed, seed sequence, or generator.
    """
    if T < 2:
        raise ParameterError(f"simulate: T must be at least 2, got {T}")
    rng = _as_generator(seed)
    total = spec.burn_in + T

    if isinstance(spec, GaussianArch1):
        eps = rng.standard_normal(total)
        y = np.empty(total)
        sigma2 = spec.unconditional_variance
        for t in range(total):
            y[t] = np.sqrt(sigma2) * eps[t]
            sigma2 = spec.c + spec.a * y[t] ** 2
    elif isinstance(spec, GarchT):
        scale = np.sqrt((spec.nu - 2.0) / spec.nu)
        eps = rng.standard_t(spec.nu, total)
        y = np.empty(total)
        sigma2 = spec.unconditional_variance
        for t in range(total):
            y[t] = scale * np.sqrt(sigma2) * eps[t]
            sigma2 = spec.c + spec.a * y[t] ** 2 + spec.b * sigma2
    elif isinstance(spec, Arma11):
        eps = spec.error.sample(rng, total)
        y = np.empty(total)
        y_prev = spec.stationary_mean
        e_prev = 0.0
        for t in range(total):
            y[t] = spec.intercept + spec.ar * y_prev + spec.ma * e_prev + eps[t]
            y_prev = y[t]
            e_prev = eps[t]
    else:
        raise TypeError(f"simulate: unsupported spec type {type(spec).__name__}")

    return ReturnSeries(values=y[spec.burn_in :])
