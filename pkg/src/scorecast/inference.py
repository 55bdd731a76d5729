"""Sampling-variation diagnostics for score-optimal forecasts.

Three tools quantify how estimation noise and evaluation noise affect
score comparisons:

* ``sandwich_covariance``: misspecification-robust covariance
  H^-1 J H^-1 of the score estimator, from finite-difference per-step
  score gradients and Hessians on the unconstrained parameter scale,
  with a Newey-West long-run variance for J.
* ``score_density_simulation``: draws parameter vectors from the
  estimator's asymptotic Gaussian and maps each draw to in-sample
  average scores, giving the sampling density of every (training rule,
  evaluation rule) score.
* ``gw_statistic`` / ``tau_star_curve``: unconditional equal-predictive-
  ability test on a score-difference series, and the evaluation span
  tau* past which the observed average difference would test as
  significant at level alpha.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy import stats

from .dgp import ReturnSeries
from .errors import CovarianceError, DegenerateSampleError, ParameterError, ShapeError
from .evaluation import ScoreMatrix
from .models import ModelFamily
from .optimizer import window_scores
from .rng import substream
from .scores import ScoringRule

__all__ = [
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
]

_FD_REL_STEP = 1e-5
_COND_LIMIT = 1e12


# ---------------------------------------------------------------------------
# sandwich covariance


@dataclass(frozen=True)
class SandwichCovariance:
    """Asymptotic covariance of a score-optimal parameter estimate.

    ``hessian`` (H) and ``long_run`` (J) live on the unconstrained
    scale; ``v = H^-1 J H^-1`` is the covariance of sqrt(T) times the
    unconstrained estimate, and ``v_natural`` maps it back to the
    natural scale by the delta method.  ``near_singular`` flags a
    pseudo-inverse fallback.
    """

    theta: np.ndarray
    theta_u: np.ndarray
    hessian: np.ndarray
    long_run: np.ndarray
    v: np.ndarray
    v_natural: np.ndarray
    lag: int
    n_scores: int
    near_singular: bool

    @property
    def dim(self) -> int:
        return int(self.theta.size)


def _fd_steps(u: np.ndarray) -> np.ndarray:
    return _FD_REL_STEP * (1.0 + np.abs(u))


def _per_obs_gradient(score_vec, u: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Central-difference per-observation gradients.

    Returns (G, f_plus, f_minus) where G is (T, d) and the f arrays hold
    the mean criterion at the +/- step points, reused for the Hessian
    diagonal.
    """
    d = u.size
    base = score_vec(u)
    T = base.size
    G = np.empty((T, d))
    f_plus = np.empty(d)
    f_minus = np.empty(d)
    for k in range(d):
        e = np.zeros(d)
        e[k] = h[k]
        sp = score_vec(u + e)
        sm = score_vec(u - e)
        G[:, k] = (sp - sm) / (2.0 * h[k])
        f_plus[k] = sp.mean()
        f_minus[k] = sm.mean()
    return G, f_plus, f_minus


def _mean_hessian(mean_fn, u: np.ndarray, h: np.ndarray,
                  f0: float, f_plus: np.ndarray, f_minus: np.ndarray) -> np.ndarray:
    d = u.size
    H = np.empty((d, d))
    for k in range(d):
        H[k, k] = (f_plus[k] - 2.0 * f0 + f_minus[k]) / h[k] ** 2
    for k in range(d):
        for l in range(k + 1, d):
            ek = np.zeros(d)
            el = np.zeros(d)
            ek[k] = h[k]
            el[l] = h[l]
            cross = (
                mean_fn(u + ek + el)
                - mean_fn(u + ek - el)
                - mean_fn(u - ek + el)
                + mean_fn(u - ek - el)
            ) / (4.0 * h[k] * h[l])
            H[k, l] = H[l, k] = cross
    return H


def _newey_west(G: np.ndarray, lag: int) -> np.ndarray:
    """Bartlett-weighted long-run covariance of the rows of ``G``."""
    T = G.shape[0]
    Gc = G - G.mean(axis=0)
    J = (Gc.T @ Gc) / T
    for l in range(1, lag + 1):
        gamma = (Gc[l:].T @ Gc[:-l]) / T
        weight = 1.0 - l / (lag + 1.0)
        J += weight * (gamma + gamma.T)
    return 0.5 * (J + J.T)


def sandwich_covariance(
    family: ModelFamily,
    theta,
    data,
    rule: ScoringRule,
    *,
    lag: int | None = None,
) -> SandwichCovariance:
    """Misspecification-robust covariance of the score estimator at ``theta``.

    Derivatives are central finite differences with step
    1e-5 * (1 + |coordinate|) on the unconstrained scale.  The long-run
    gradient covariance uses a Bartlett kernel with ``lag`` autocovariance
    terms, default floor(T^(1/3)) for T scored observations.

    Raises:
        CovarianceError: when derivatives are non-finite (for example at
            a domain boundary).
    """
    theta = family.validate(theta)
    if not rule.resolved:
        raise ParameterError(f"rule {rule.label!r} needs a resolved region")
    y = data.values if isinstance(data, ReturnSeries) else np.asarray(data, dtype=float)
    u = family.to_unconstrained(theta)
    h = _fd_steps(u)

    def score_vec(uu: np.ndarray) -> np.ndarray:
        return window_scores(family, family.from_unconstrained(uu), y, rule)

    def mean_fn(uu: np.ndarray) -> float:
        return float(score_vec(uu).mean())

    base = score_vec(u)
    T = base.size
    if lag is None:
        lag = int(np.floor(T ** (1.0 / 3.0)))
    G, f_plus, f_minus = _per_obs_gradient(score_vec, u, h)
    H = _mean_hessian(mean_fn, u, h, float(base.mean()), f_plus, f_minus)
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(H))):
        raise CovarianceError(
            f"non-finite score derivatives for {family.name} under {rule.label}; "
            "the estimate may sit on a domain boundary"
        )
    J = _newey_west(G, lag)

    near_singular = False
    try:
        cond = np.linalg.cond(H)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        near_singular = True
        Hinv = np.linalg.pinv(H)
        V = Hinv @ J @ Hinv
    else:
        V = np.linalg.solve(H, np.linalg.solve(H, J).T).T
    V = 0.5 * (V + V.T)

    # Delta method back to the natural scale.
    d = u.size
    Jac = np.empty((d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h[k]
        Jac[:, k] = (family.from_unconstrained(u + e) - family.from_unconstrained(u - e)) / (
            2.0 * h[k]
        )
    V_nat = Jac @ V @ Jac.T
    V_nat = 0.5 * (V_nat + V_nat.T)

    return SandwichCovariance(
        theta=theta,
        theta_u=u,
        hessian=H,
        long_run=J,
        v=V,
        v_natural=V_nat,
        lag=lag,
        n_scores=T,
        near_singular=near_singular,
    )


# ---------------------------------------------------------------------------
# score-density simulation


@dataclass(frozen=True)
class ScoreDensitySample:
    """In-sample average scores over parameter draws for one rule pair.

    ``draws[m]`` is the evaluation-rule average score at the m-th
    parameter draw from the training rule's asymptotic Gaussian;
    ``point_score`` is the score at the estimate itself.
    """

    optimizer_rule: str
    evaluation_rule: str
    draws: np.ndarray
    point_score: float
    clip_count: int


def _psd_floor(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    if not np.all(np.isfinite(cov)):
        raise CovarianceError("covariance contains non-finite entries")
    eigvals, eigvecs = np.linalg.eigh(cov)
    floored = (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T
    return 0.5 * (floored + floored.T)


def score_density_simulation(
    family: ModelFamily,
    optimizer_rules: Sequence[Union[ScoringRule, str]],
    theta_hats: Sequence[np.ndarray],
    covariances: Sequence[Union[SandwichCovariance, np.ndarray]],
    data,
    evaluation_rules: Sequence[Union[ScoringRule, str]],
    M: int,
    seed: int = 0,
) -> list[ScoreDensitySample]:
    """Sampling densities of in-sample average scores across rule pairs.

    For each training rule i, ``M`` parameter vectors are drawn from
    N(theta_hat_i, V_i / T) on the natural scale (``SandwichCovariance``
    inputs are scaled by their sample size; raw matrices are used as the
    finite-sample covariance directly).  Covariances are symmetrized
    and eigenvalue-floored at zero.  Draws falling outside the family's
    domain are nudged to the interior and counted.  Each draw is mapped
    to its full-sample average score under every evaluation rule;
    censored-rule regions are resolved once on the full sample.

    A zero covariance reproduces the point score in every draw.
    """
    opt_rules = [ScoringRule.parse(r) if isinstance(r, str) else r for r in optimizer_rules]
    if not (len(opt_rules) == len(theta_hats) == len(covariances)):
        raise ShapeError(
            "score_density_simulation: rules, estimates, and covariances must align"
        )
    if M < 1:
        raise ParameterError(f"M must be positive, got {M}")
    y = data.values if isinstance(data, ReturnSeries) else np.asarray(data, dtype=float)
    eval_rules = [
        (ScoringRule.parse(r) if isinstance(r, str) else r).resolve(y)
        for r in evaluation_rules
    ]

    out: list[ScoreDensitySample] = []
    for rule_i, theta_hat, cov in zip(opt_rules, theta_hats, covariances):
        theta_hat = family.validate(theta_hat)
        if isinstance(cov, SandwichCovariance):
            sigma = cov.v_natural / cov.n_scores
        else:
            sigma = np.asarray(cov, dtype=float)
        if sigma.shape != (theta_hat.size, theta_hat.size):
            raise ShapeError(
                f"covariance shape {sigma.shape} does not match {theta_hat.size} parameters"
            )
        sigma = _psd_floor(sigma)
        rng = substream(seed, f"density:{rule_i.label}")
        draws = rng.multivariate_normal(theta_hat, sigma, size=M, method="eigh")

        clip_count = 0
        score_draws = np.empty((M, len(eval_rules)))
        for m in range(M):
            theta_m = draws[m]
            try:
                family.validate(theta_m)
            except (ParameterError, ShapeError):
                theta_m = family.clip_to_domain(theta_m)
                clip_count += 1
            for j, rule_j in enumerate(eval_rules):
                score_draws[m, j] = float(window_scores(family, theta_m, y, rule_j).mean())
        for j, rule_j in enumerate(eval_rules):
            point = float(window_scores(family, theta_hat, y, rule_j).mean())
            out.append(
                ScoreDensitySample(
                    optimizer_rule=rule_i.label,
                    evaluation_rule=rule_j.label,
                    draws=score_draws[:, j].copy(),
                    point_score=point,
                    clip_count=clip_count,
                )
            )
    return out


def kde_curve(draws: np.ndarray, n_grid: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian-kernel density of a draw sample, Silverman bandwidth.

    Degenerate (constant) samples return a single grid point with unit
    mass marker density.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.size < 1:
        raise DegenerateSampleError("kde_curve: empty sample")
    if np.ptp(draws) == 0.0:
        return draws[:1].copy(), np.array([1.0])
    kde = stats.gaussian_kde(draws, bw_method="silverman")
    bandwidth = float(kde.factor * draws.std(ddof=1))
    grid = np.linspace(draws.min() - 3 * bandwidth, draws.max() + 3 * bandwidth, n_grid)
    return grid, kde(grid)


# ---------------------------------------------------------------------------
# equal-predictive-ability testing


class GwResult(NamedTuple):
    z: float
    p_value: float


def gw_statistic(delta_series) -> GwResult:
    """Unconditional equal-predictive-ability statistic on score differences.

    Z = tau * mean(delta)^2 / var(delta) with the plain sample variance
    (ddof=1), referred to a chi-squared(1) law.  An identically zero
    series returns Z = 0 by convention.

    Raises:
        DegenerateSampleError: if the series is constant but nonzero, or
            shorter than 2.
    """
    delta = np.asarray(delta_series, dtype=float)
    if delta.ndim != 1 or delta.size < 2:
        raise DegenerateSampleError(
            f"gw_statistic: need a 1-D series of length >= 2, got shape {delta.shape}"
        )
    if not np.all(np.isfinite(delta)):
        raise ParameterError("gw_statistic: series contains non-finite values")
    mean = float(delta.mean())
    var = float(delta.var(ddof=1))
    # An exactly constant series has zero variance even when accumulation
    # noise makes the computed var a subnormal positive number.
    if np.ptp(delta) == 0.0 or var == 0.0:
        if delta[0] == 0.0 and mean == 0.0:
            return GwResult(z=0.0, p_value=1.0)
        raise DegenerateSampleError(
            "gw_statistic: zero variance with nonzero mean; statistic is degenerate"
        )
    z = delta.size * mean * mean / var
    return GwResult(z=float(z), p_value=float(stats.chi2.sf(z, df=1)))


@dataclass(frozen=True)
class TauStarCurve:
    """tau* as a function of the evaluation span tau.

    For each prefix of the score-difference series, ``tau_star`` is the
    span at which the prefix mean difference would become significant at
    level ``alpha``; values are clamped into [1, tau] with
    ``clamped`` flagging every adjusted point (nonpositive mean
    differences clamp to tau, so dominated comparisons draw the 45-degree
    line).
    """

    taus: np.ndarray
    tau_star: np.ndarray
    clamped: np.ndarray
    alpha: float
    rule_j: str | None = None
    rule_i: str | None = None

    @property
    def final(self) -> float:
        return float(self.tau_star[-1])

    @property
    def final_clamped(self) -> bool:
        return bool(self.clamped[-1])


def tau_star_curve(
    delta_series,
    alpha: float = 0.05,
    *,
    rule_j: str | None = None,
    rule_i: str | None = None,
) -> TauStarCurve:
    """Required evaluation span tau* for every prefix of a difference series.

    tau*(tau) = chi2_crit(1 - alpha) * var_tau / mean_tau^2 computed
    from the first tau differences, clamped to tau when the mean is
    nonpositive or the prefix variance is zero or the formula exceeds
    tau, and floored at 1.  At every
    unclamped point, tau > tau* holds exactly when the GW statistic of
    that prefix exceeds its critical value.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    delta = np.asarray(delta_series, dtype=float)
    if delta.ndim != 1 or delta.size < 1:
        raise ShapeError(f"tau_star_curve: need a 1-D series, got shape {delta.shape}")
    if not np.all(np.isfinite(delta)):
        raise ParameterError("tau_star_curve: series contains non-finite values")
    n = delta.size
    taus = np.arange(1, n + 1)
    csum = np.cumsum(delta)
    csum2 = np.cumsum(delta * delta)
    means = csum / taus
    # Prefix sample variance (ddof=1); zero at tau=1 by convention.
    with np.errstate(invalid="ignore", divide="ignore"):
        variances = np.where(
            taus > 1, np.maximum(csum2 - taus * means**2, 0.0) / np.maximum(taus - 1, 1), 0.0
        )
    crit = float(stats.chi2.ppf(1.0 - alpha, df=1))

    # Prefixes over which the series is exactly constant have zero sample
    # variance even when float accumulation reports a subnormal positive
    # value; detect them exactly so the degenerate clamp applies.
    differs = np.flatnonzero(delta != delta[0])
    n_constant = int(differs[0]) if differs.size else n
    constant = taus <= n_constant
    variances[constant] = 0.0

    tau_star = np.empty(n, dtype=float)
    clamped = np.zeros(n, dtype=bool)
    positive = means > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = crit * variances / means**2
    # Nonpositive mean difference: never significant in the observed
    # direction, clamp to the full span.
    tau_star[~positive] = taus[~positive]
    clamped[~positive] = True
    over = positive & (raw > taus)
    tau_star[over] = taus[over]
    clamped[over] = True
    under = positive & (raw < 1.0)
    tau_star[under] = 1.0
    clamped[under] = True
    keep = positive & ~over & ~under
    tau_star[keep] = raw[keep]
    # Zero-variance prefixes: the statistic is degenerate, so no finite
    # span can be read off the formula; report the full span, flagged.
    tau_star[constant] = taus[constant]
    clamped[constant] = True
    return TauStarCurve(
        taus=taus, tau_star=tau_star, clamped=clamped, alpha=alpha,
        rule_j=rule_j, rule_i=rule_i,
    )


def tau_star_from_matrix(
    matrix: ScoreMatrix,
    pairs: Sequence[tuple[str, str]] | None = None,
    alpha: float = 0.05,
) -> list[TauStarCurve]:
    """tau* curves for (evaluation rule j, competing optimizer rule i) pairs.

    Defaults to every ordered pair of evaluation rules that also appear
    as optimizer rules, including the diagonal (which clamps into the
    45-degree line by construction).
    """
    if pairs is None:
        shared = [r for r in matrix.evaluation_rules if r in matrix.optimizer_rules]
        pairs = [(j, i) for j in shared for i in shared]
    curves = []
    for rule_j, rule_i in pairs:
        delta = matrix.delta_series(rule_j, against=rule_i)
        curves.append(tau_star_curve(delta, alpha, rule_j=rule_j, rule_i=rule_i))
    return curves
