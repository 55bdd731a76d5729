"""Positively oriented scoring rules for Gaussian-mixture forecasts.

Four rules are implemented, all oriented so that larger is better:

* ``ls``    log score, ln p(y).
* ``crps``  negated continuous ranked probability score,
            -integral of (P(x) - 1{x >= y})^2 dx, in closed form.
* ``cls``   censored log score for a tail region A: ln p(y) when y falls
            in A, otherwise the log predictive mass of the complement.
* ``qs``    quantile score (y - q)(1{y <= q} - level) at the predictive
            quantile q.

Log-type scores floor the density (or tail mass) at 1e-300 before taking
logs; floored values equal ``LOG_FLOOR`` exactly so callers can count
occurrences.

Rules are identified by compact strings used in configs, tables, and
file names: ``ls``, ``crps``, ``cls@0.10:lower``, ``cls@0.90:upper``,
``qs@0.05``, ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DegenerateSampleError, ParameterError, ParseError, ShapeError
from .models import PredictiveLaw, _mixture_quantile

__all__ = [
    "LOG_FLOOR",
    "Region",
    "ScoringRule",
    "resolve_region",
    "log_score",
    "crps",
    "censored_ls",
    "quantile_score",
    "score",
    "average_score",
    "gaussian_scores",
    "mixture_scores",
]

LOG_FLOOR = math.log(1e-300)

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# regions and rule identifiers


@dataclass(frozen=True)
class Region:
    """A one-sided tail region of the real line.

    ``side="lower"`` means A = (-inf, threshold]; ``side="upper"`` means
    A = [threshold, inf).  ``level`` records the quantile level the
    threshold was resolved at.
    """

    side: str
    level: float
    threshold: float

    def __post_init__(self) -> None:
        if self.side not in ("lower", "upper"):
            raise ParameterError(f"Region: side must be 'lower' or 'upper', got {self.side!r}")
        if not 0.0 < self.level < 1.0:
            raise ParameterError(f"Region: level must lie in (0, 1), got {self.level}")
        if not np.isfinite(self.threshold):
            raise ParameterError(f"Region: threshold must be finite, got {self.threshold}")

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return y <= self.threshold if self.side == "lower" else y >= self.threshold


def resolve_region(sample, side: str, level: float, method: str = "linear") -> Region:
    """Fix a tail region's threshold at an empirical quantile of ``sample``.

    The quantile definition defaults to numpy's ``linear`` interpolation
    (Hyndman-Fan type 7) and can be overridden via ``method``.

    Raises:
        DegenerateSampleError: for samples shorter than 10 or constant.
    """
    sample = np.asarray(sample, dtype=float)
    if sample.ndim != 1 or sample.size < 10:
        raise DegenerateSampleError(
            f"resolve_region: need a 1-D sample of at least 10 points, got shape {sample.shape}"
        )
    if np.min(sample) == np.max(sample):
        raise DegenerateSampleError("resolve_region: sample is constant")
    threshold = float(np.quantile(sample, level, method=method))
    return Region(side=side, level=float(level), threshold=threshold)


def _format_level(level: float) -> str:
    return f"{level:.2f}" if round(level, 2) == level else repr(level)


@dataclass(frozen=True)
class ScoringRule:
    """A scoring rule identifier, possibly carrying a resolved region.

    Censored rules (``cls``) are created unresolved; calling
    :meth:`resolve` on a data window fixes the threshold.
    """

    kind: str
    level: float | None = None
    side: str | None = None
    region: Region | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("ls", "crps", "cls", "qs"):
            raise ParameterError(f"ScoringRule: unknown kind {self.kind!r}")
        if self.kind in ("ls", "crps"):
            if self.level is not None or self.side is not None or self.region is not None:
                raise ParameterError(f"ScoringRule: {self.kind} takes no level or region")
        elif self.kind == "qs":
            if self.level is None or not 0.0 < self.level < 1.0:
                raise ParameterError(f"ScoringRule: qs level must lie in (0, 1), got {self.level}")
            if self.side is not None or self.region is not None:
                raise ParameterError("ScoringRule: qs takes no side or region")
        else:  # cls
            if self.level is None or not 0.0 < self.level < 1.0:
                raise ParameterError(f"ScoringRule: cls level must lie in (0, 1), got {self.level}")
            if self.side not in ("lower", "upper"):
                raise ParameterError(f"ScoringRule: cls side must be 'lower' or 'upper', got {self.side!r}")
            if self.region is not None and (
                self.region.side != self.side or self.region.level != self.level
            ):
                raise ParameterError("ScoringRule: region does not match the rule's side/level")

    # -- constructors

    @classmethod
    def ls(cls) -> "ScoringRule":
        return cls("ls")

    @classmethod
    def crps(cls) -> "ScoringRule":
        return cls("crps")

    @classmethod
    def cls_tail(cls, level: float, side: str, region: Region | None = None) -> "ScoringRule":
        return cls("cls", level=float(level), side=side, region=region)

    @classmethod
    def qs(cls, level: float) -> "ScoringRule":
        return cls("qs", level=float(level))

    @classmethod
    def parse(cls, text: str) -> "ScoringRule":
        """Parse a rule identifier such as ``cls@0.10:lower`` or ``qs@0.05``."""
        text = text.strip()
        if text == "ls":
            return cls.ls()
        if text == "crps":
            return cls.crps()
        if text.startswith("cls@"):
            body = text[4:]
            if ":" not in body:
                raise ParseError(f"scoring rule {text!r}: cls needs a ':lower' or ':upper' suffix")
            level_text, side = body.split(":", 1)
            try:
                level = float(level_text)
            except ValueError:
                raise ParseError(f"scoring rule {text!r}: bad level {level_text!r}") from None
            if not 0.0 < level < 1.0:
                raise ParseError(f"scoring rule {text!r}: level must lie in (0, 1)")
            if side not in ("lower", "upper"):
                raise ParseError(f"scoring rule {text!r}: side must be 'lower' or 'upper'")
            return cls.cls_tail(level, side)
        if text.startswith("qs@"):
            try:
                level = float(text[3:])
            except ValueError:
                raise ParseError(f"scoring rule {text!r}: bad level {text[3:]!r}") from None
            if not 0.0 < level < 1.0:
                raise ParseError(f"scoring rule {text!r}: level must lie in (0, 1)")
            return cls.qs(level)
        raise ParseError(f"unknown scoring rule {text!r}")

    # -- behavior

    @property
    def label(self) -> str:
        if self.kind == "cls":
            return f"cls@{_format_level(self.level)}:{self.side}"
        if self.kind == "qs":
            return f"qs@{_format_level(self.level)}"
        return self.kind

    @property
    def needs_region(self) -> bool:
        return self.kind == "cls"

    @property
    def resolved(self) -> bool:
        return self.kind != "cls" or self.region is not None

    def resolve(self, sample, method: str = "linear") -> "ScoringRule":
        """Return a copy with the region threshold fixed on ``sample``."""
        if self.kind != "cls":
            return self
        return replace(self, region=resolve_region(sample, self.side, self.level, method))

    def with_region(self, region: Region) -> "ScoringRule":
        if self.kind != "cls":
            raise ParameterError(f"ScoringRule: {self.kind} does not carry a region")
        return replace(self, region=region)


# ---------------------------------------------------------------------------
# vectorized kernels


def _phi(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def _require_region(rule: ScoringRule) -> Region:
    if rule.region is None:
        raise ParameterError(f"scoring rule {rule.label!r} has no resolved region")
    return rule.region


def gaussian_scores(rule: ScoringRule, mu, var, y) -> np.ndarray:
    """Per-observation scores of Gaussian forecasts N(mu_t, var_t) for y_t.

    All arguments broadcast; the result has the broadcast shape.
    """
    mu, var, y = (np.asarray(a, dtype=float) for a in (mu, var, y))
    sd = np.sqrt(var)
    if rule.kind == "ls":
        z = (y - mu) / sd
        val = -0.5 * (np.log(2.0 * np.pi * var) + z * z)
        return np.maximum(val, LOG_FLOOR)
    if rule.kind == "crps":
        z = (y - mu) / sd
        return -sd * (z * (2.0 * special.ndtr(z) - 1.0) + 2.0 * _phi(z) - _INV_SQRT_PI)
    if rule.kind == "cls":
        region = _require_region(rule)
        z = (y - mu) / sd
        inside_val = np.maximum(-0.5 * (np.log(2.0 * np.pi * var) + z * z), LOG_FLOOR)
        # Log mass of the complement region, via the accurate log-CDF.
        if region.side == "lower":
            outside_val = special.log_ndtr((mu - region.threshold) / sd)
        else:
            outside_val = special.log_ndtr((region.threshold - mu) / sd)
        outside_val = np.maximum(outside_val, LOG_FLOOR)
        inside = region.contains(y)
        return np.where(inside, inside_val, outside_val)
    if rule.kind == "qs":
        q = mu + sd * special.ndtri(rule.level)
        return (y - q) * ((y <= q).astype(float) - rule.level)
    raise ParameterError(f"gaussian_scores: unsupported rule {rule.kind!r}")


def _abs_moment(m: np.ndarray, s2: np.ndarray) -> np.ndarray:
    # E|X| for X ~ N(m, s2).
    s = np.sqrt(s2)
    h = m / s
    return m * (2.0 * special.ndtr(h) - 1.0) + 2.0 * s * _phi(h)


def mixture_scores(rule: ScoringRule, weights, means, variances, y) -> np.ndarray:
    """Per-observation scores of Gaussian-mixture forecasts.

    Args:
        weights: component weights, shape (K,), shared across time.
        means: component means, shape (T, K).
        variances: component variances, shape (T, K).
        y: realizations, shape (T,).
    """
    w = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    y = np.asarray(y, dtype=float)
    if means.ndim != 2 or means.shape != variances.shape:
        raise ShapeError(
            f"mixture_scores: means/variances must share a (T, K) shape, got {means.shape} and {variances.shape}"
        )
    if w.shape != (means.shape[1],) or y.shape != (means.shape[0],):
        raise ShapeError(
            f"mixture_scores: got weights {w.shape}, y {y.shape} for components {means.shape}"
        )
    if means.shape[1] == 1:
        # single component: defer to the Gaussian kernel so one-component
        # pools agree with the single-model path bit for bit
        return gaussian_scores(rule, means[:, 0], variances[:, 0], y)
    sd = np.sqrt(variances)
    with np.errstate(divide="ignore"):
        log_w = np.log(w)

    if rule.kind in ("ls", "cls"):
        z = (y[:, None] - means) / sd
        comp_logpdf = -0.5 * (np.log(2.0 * np.pi * variances) + z * z)
        logpdf = special.logsumexp(comp_logpdf + log_w, axis=1)
        inside_val = np.maximum(logpdf, LOG_FLOOR)
        if rule.kind == "ls":
            return inside_val
        region = _require_region(rule)
        if region.side == "lower":
            comp_tail = special.log_ndtr((means - region.threshold) / sd)
        else:
            comp_tail = special.log_ndtr((region.threshold - means) / sd)
        outside_val = np.maximum(special.logsumexp(comp_tail + log_w, axis=1), LOG_FLOOR)
        return np.where(region.contains(y), inside_val, outside_val)
    if rule.kind == "crps":
        term1 = _abs_moment(y[:, None] - means, variances) @ w
        diff = means[:, :, None] - means[:, None, :]
        svar = variances[:, :, None] + variances[:, None, :]
        term2 = 0.5 * np.einsum("c,d,tcd->t", w, w, _abs_moment(diff, svar))
        return -(term1 - term2)
    if rule.kind == "qs":
        q = _mixture_quantile(np.full(y.shape[0], rule.level), w, means, variances)
        return (y - q) * ((y <= q).astype(float) - rule.level)
    raise ParameterError(f"mixture_scores: unsupported rule {rule.kind!r}")


# ---------------------------------------------------------------------------
# per-law operations


def _law_scores(law: PredictiveLaw, y, rule: ScoringRule) -> np.ndarray | float:
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if law.n_components == 1:
        out = gaussian_scores(rule, law.means[0], law.variances[0], y_arr)
    else:
        T = y_arr.shape[0]
        means = np.broadcast_to(law.means, (T, law.n_components))
        variances = np.broadcast_to(law.variances, (T, law.n_components))
        out = mixture_scores(rule, law.weights, means, variances, y_arr)
    return float(out[0]) if np.ndim(y) == 0 else out


def log_score(p: PredictiveLaw, y) -> np.ndarray | float:
    """ln p(y), floored at ``LOG_FLOOR``."""
    return _law_scores(p, y, ScoringRule.ls())


def crps(p: PredictiveLaw, y) -> np.ndarray | float:
    """Negated CRPS of ``p`` at ``y`` (closed form; larger is better)."""
    return _law_scores(p, y, ScoringRule.crps())


def censored_ls(p: PredictiveLaw, y, region: Region) -> np.ndarray | float:
    """Censored log score for the tail region ``region``."""
    rule = ScoringRule.cls_tail(region.level, region.side, region)
    return _law_scores(p, y, rule)


def quantile_score(p: PredictiveLaw, y, level: float) -> np.ndarray | float:
    """Quantile score at ``level``; zero when y equals the predictive quantile."""
    return _law_scores(p, y, ScoringRule.qs(level))


def score(p: PredictiveLaw, y, rule: ScoringRule) -> np.ndarray | float:
    """Score ``y`` under ``rule``; censored rules must be resolved."""
    return _law_scores(p, y, rule)


def average_score(predictions: Sequence[PredictiveLaw], ys, rule: ScoringRule) -> float:
    """Mean score of a forecast sequence against realizations ``ys``."""
    ys = np.asarray(ys, dtype=float)
    if len(predictions) == 0:
        raise ShapeError("average_score: empty prediction sequence")
    if ys.shape != (len(predictions),):
        raise ShapeError(
            f"average_score: {len(predictions)} predictions but realizations of shape {ys.shape}"
        )
    values = [float(score(p, float(yt), rule)) for p, yt in zip(predictions, ys)]
    return float(np.mean(values))


def count_floored(scores: np.ndarray) -> int:
    """Number of entries that hit the log floor exactly."""
    return int(np.count_nonzero(np.asarray(scores) == LOG_FLOOR))
