"""Out-of-sample experiment protocols and score matrices.

Two protocols produce a score matrix whose rows are "optimizer" rules
(the rule a forecaster was trained to maximize) and whose columns are
evaluation rules:

* ``single_model_experiment``: one model family, parameters re-estimated
  on an expanding (or rolling) window, each step scored one step ahead.
* ``pool_experiment``: several families fit on a rolling window of
  length J, pool weights fit on the following zeta one-step densities,
  and the pooled forecast scored on the step after that.

Censored-rule thresholds are resolved from the current estimation
window each time estimation happens and are reused for that window's
out-of-sample scoring.  Entry (i, j) of the matrix is the average
evaluation-rule-j score of the rule-i forecaster.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .dgp import DgpSpec, GaussianArch1, GarchT, Arma11, ReturnSeries, simulate
from .errors import (
    BoundaryWarning,
    ExperimentError,
    OptimizationFailure,
    ParameterError,
    ShapeError,
)
from .models import ModelFamily, get_family
from .optimizer import (
    PoolScorer,
    _maximize,
    optimal_score_estimate,
    simplex_from_unconstrained,
    simplex_to_unconstrained,
)
from .rng import substream
from .scores import LOG_FLOOR, Region, ScoringRule, gaussian_scores, mixture_scores

__all__ = [
    "ScoreMatrix",
    "CoherenceVerdict",
    "single_model_experiment",
    "pool_experiment",
    "coherence_verdict",
    "render_table",
]

DataSource = Union[DgpSpec, ReturnSeries, np.ndarray, Sequence[float]]


# ---------------------------------------------------------------------------
# result containers


@dataclass
class ScoreMatrix:
    """Average out-of-sample scores, optimizer rules by evaluation rules.

    ``per_step_scores`` holds the full (tau, rows, cols) score cube when
    the experiment retained it; diagnostics count log-floor hits per
    cell and optimizer fallbacks per row.
    """

    optimizer_rules: tuple[str, ...]
    evaluation_rules: tuple[str, ...]
    entries: np.ndarray
    tau: int
    counts: np.ndarray
    floor_counts: np.ndarray
    fallback_counts: np.ndarray
    per_step_scores: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        shape = (len(self.optimizer_rules), len(self.evaluation_rules))
        if self.entries.shape != shape:
            raise ShapeError(f"ScoreMatrix: entries shape {self.entries.shape} != {shape}")
        if not np.all(np.isfinite(self.entries)):
            raise ParameterError("ScoreMatrix: entries must be finite")

    def entry(self, optimizer_rule: str, evaluation_rule: str) -> float:
        i = self.optimizer_rules.index(optimizer_rule)
        j = self.evaluation_rules.index(evaluation_rule)
        return float(self.entries[i, j])

    def delta_series(self, evaluation_rule: str, against: str) -> np.ndarray:
        """Per-step score differences S_j(rule-j forecaster) - S_j(``against``).

        Requires the per-step cube.  ``evaluation_rule`` plays both the
        scoring rule j and the first forecaster; ``against`` is the
        competing optimizer rule i.
        """
        if self.per_step_scores is None:
            raise ParameterError("ScoreMatrix: per-step scores were not retained")
        j = self.evaluation_rules.index(evaluation_rule)
        row_j = self.optimizer_rules.index(evaluation_rule)
        row_i = self.optimizer_rules.index(against)
        cube = self.per_step_scores
        return cube[:, row_j, j] - cube[:, row_i, j]


@dataclass(frozen=True)
class CoherenceVerdict:
    """Whether each evaluation rule's own optimizer tops its column.

    ``margins[j]`` is the diagonal entry minus the best off-diagonal
    entry of column j; nonnegative margins set ``is_max_on_diagonal``.
    """

    rules: tuple[str, ...]
    is_max_on_diagonal: tuple[bool, ...]
    margins: tuple[float, ...]

    @property
    def strict_coherence(self) -> bool:
        return all(m > 0 for m in self.margins)


def coherence_verdict(matrix: ScoreMatrix) -> CoherenceVerdict:
    """Diagonal-dominance check of a square-compatible score matrix."""
    missing = [r for r in matrix.evaluation_rules if r not in matrix.optimizer_rules]
    if missing:
        raise ParameterError(
            f"coherence_verdict: evaluation rules {missing} have no optimizer row"
        )
    flags: list[bool] = []
    margins: list[float] = []
    for j, rule in enumerate(matrix.evaluation_rules):
        diag_row = matrix.optimizer_rules.index(rule)
        column = matrix.entries[:, j]
        others = np.delete(column, diag_row)
        margin = float(column[diag_row] - others.max()) if others.size else np.inf
        margins.append(margin)
        flags.append(margin >= 0)
    return CoherenceVerdict(
        rules=matrix.evaluation_rules,
        is_max_on_diagonal=tuple(flags),
        margins=tuple(margins),
    )


# ---------------------------------------------------------------------------
# shared plumbing


def _as_rules(rules: Sequence[Union[ScoringRule, str]]) -> list[ScoringRule]:
    out = [ScoringRule.parse(r) if isinstance(r, str) else r for r in rules]
    if not out:
        raise ParameterError("experiment needs at least one scoring rule")
    labels = [r.label for r in out]
    if len(set(labels)) != len(labels):
        raise ParameterError(f"duplicate scoring rules: {labels}")
    return out


def _as_family(family: Union[ModelFamily, str]) -> ModelFamily:
    return get_family(family) if isinstance(family, str) else family


def _materialize(source: DataSource, T: int | None, seed: int) -> np.ndarray:
    if isinstance(source, (GaussianArch1, GarchT, Arma11)):
        if T is None:
            raise ParameterError("T is required when the data source is a process spec")
        return simulate(source, T, substream(seed, "dgp")).values
    values = source.values if isinstance(source, ReturnSeries) else np.asarray(source, float)
    if values.ndim != 1 or values.size < 2:
        raise ShapeError(f"data source must be a 1-D series, got shape {values.shape}")
    if T is not None and T != values.size:
        raise ParameterError(f"T={T} does not match the supplied series length {values.size}")
    return values


def _region_levels(rules: Sequence[ScoringRule]) -> list[tuple[str, float]]:
    seen: list[tuple[str, float]] = []
    for rule in rules:
        if rule.kind == "cls":
            key = (rule.side, rule.level)
            if key not in seen:
                seen.append(key)
    return seen


def _resolve_regions(
    window: np.ndarray, keys: Sequence[tuple[str, float]], method: str
) -> dict[tuple[str, float], Region]:
    from .scores import resolve_region

    return {key: resolve_region(window, key[0], key[1], method) for key in keys}


def _attach_region(rule: ScoringRule, regions: dict[tuple[str, float], Region]) -> ScoringRule:
    if rule.kind != "cls":
        return rule
    return rule.with_region(regions[(rule.side, rule.level)])


def _refit(
    family: ModelFamily,
    window: np.ndarray,
    rule: ScoringRule,
    prev_theta: np.ndarray | None,
    seed: int,
) -> tuple[np.ndarray | None, bool]:
    """Warm-start refit with a multi-start retry.

    Returns (theta, fell_back); theta is None when even the multi-start
    failed and there is no previous parameter to fall back to.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        if prev_theta is not None:
            try:
                report = optimal_score_estimate(
                    family, window, rule, init=prev_theta, restarts=1, seed=seed
                )
                return report.argmax, False
            except (OptimizationFailure, ParameterError):
                # An unusable warm start falls through to the cold multi-start.
                pass
        try:
            report = optimal_score_estimate(
                family, window, rule, init=prev_theta, restarts=5, seed=seed
            )
            return report.argmax, False
        except OptimizationFailure:
            if prev_theta is not None:
                return prev_theta, True
            return None, True


# ---------------------------------------------------------------------------
# single-model protocol


def single_model_experiment(
    data_source: DataSource,
    family: Union[ModelFamily, str],
    optimizer_rules: Sequence[Union[ScoringRule, str]],
    evaluation_rules: Sequence[Union[ScoringRule, str]],
    *,
    T: int | None = None,
    est_start: int = 1000,
    refit_every: int = 1,
    seed: int = 0,
    window: str = "expanding",
    quantile_method: str = "linear",
    keep_per_step: bool = True,
) -> ScoreMatrix:
    """Walk-forward evaluation of one family under several training rules.

    The first forecast targets observation ``est_start`` (0-based), with
    parameters refit every ``refit_every`` steps on the expanding
    history (or a rolling window of length ``est_start``).  Each step is
    scored one step ahead under every evaluation rule.

    Identical arguments reproduce the matrix bit-for-bit.
    """
    fam = _as_family(family)
    opt_rules = _as_rules(optimizer_rules)
    eval_rules = _as_rules(evaluation_rules)
    y = _materialize(data_source, T, seed)
    total = y.size
    if not 2 <= est_start < total:
        raise ParameterError(f"est_start={est_start} must lie in [2, {total})")
    if refit_every < 1:
        raise ParameterError(f"refit_every must be positive, got {refit_every}")
    if window not in ("expanding", "rolling"):
        raise ParameterError(f"window must be 'expanding' or 'rolling', got {window!r}")
    tau = total - est_start
    region_keys = _region_levels(list(opt_rules) + list(eval_rules))

    n_rows, n_cols = len(opt_rules), len(eval_rules)
    cube = np.empty((tau, n_rows, n_cols))
    fallbacks = np.zeros(n_rows, dtype=int)

    # Threshold schedule is row-independent: one resolution per refit event.
    event_steps = list(range(0, tau, refit_every))
    event_regions: dict[int, dict[tuple[str, float], Region]] = {}
    for s in event_steps:
        t = est_start + s
        win = y[:t] if window == "expanding" else y[t - est_start : t]
        event_regions[s] = _resolve_regions(win, region_keys, quantile_method) if region_keys else {}

    for i, opt_rule in enumerate(opt_rules):
        theta: np.ndarray | None = None
        regions: dict[tuple[str, float], Region] = {}
        for s in event_steps:
            t = est_start + s
            block = min(refit_every, tau - s)
            win = y[:t] if window == "expanding" else y[t - est_start : t]
            regions = event_regions[s]
            fitted_rule = _attach_region(opt_rule, regions)
            theta_new, fell_back = _refit(fam, win, fitted_rule, theta, seed)
            if theta_new is None:
                raise ExperimentError(
                    f"optimization failed at the first window (step {t}) for rule {opt_rule.label}"
                )
            if fell_back:
                fallbacks[i] += 1
            theta = theta_new

            # Score the whole block with these parameters and regions.
            if window == "expanding":
                mu_all, var_all = fam.predictive_moments(theta, y[: t + block])
                mu_b = mu_all[t - 1 : t + block - 1]
                var_b = var_all[t - 1 : t + block - 1]
            else:
                mu_b = np.empty(block)
                var_b = np.empty(block)
                for k in range(block):
                    mu_w, var_w = fam.predictive_moments(
                        theta, y[t + k - est_start : t + k]
                    )
                    mu_b[k], var_b[k] = mu_w[-1], var_w[-1]
            y_b = y[t : t + block]
            for j, eval_rule in enumerate(eval_rules):
                cube[s : s + block, i, j] = gaussian_scores(
                    _attach_region(eval_rule, regions), mu_b, var_b, y_b
                )

    entries = cube.mean(axis=0)
    floor_counts = (cube == LOG_FLOOR).sum(axis=0).astype(int)
    counts = np.full((n_rows, n_cols), tau, dtype=int)
    return ScoreMatrix(
        optimizer_rules=tuple(r.label for r in opt_rules),
        evaluation_rules=tuple(r.label for r in eval_rules),
        entries=entries,
        tau=tau,
        counts=counts,
        floor_counts=floor_counts,
        fallback_counts=fallbacks,
        per_step_scores=cube if keep_per_step else None,
        meta={
            "protocol": "single_model",
            "family": fam.name,
            "est_start": est_start,
            "refit_every": refit_every,
            "window": window,
            "seed": seed,
            "T": total,
        },
    )


# ---------------------------------------------------------------------------
# pool protocol


def _fit_weights(
    scorer: PoolScorer,
    w_prev: np.ndarray | None,
    seed: int,
    stream: str,
) -> tuple[np.ndarray, bool]:
    """Weight fit with warm start and multi-start retry; falls back to
    the previous weights (flagged) when nothing converges."""
    n = scorer.n_pool
    w0 = w_prev if w_prev is not None else np.full(n, 1.0 / n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        u0 = simplex_to_unconstrained(w0)

    def objective(u: np.ndarray) -> float:
        return scorer.criterion(simplex_from_unconstrained(u))

    restarts = 1 if w_prev is not None else 5
    u, _, _, ok, _ = _maximize(objective, u0, restarts, seed, stream)
    if not ok and restarts == 1:
        u, _, _, ok, _ = _maximize(objective, u0, 5, seed, stream)
    if not ok:
        if w_prev is not None:
            return w_prev, True
        return simplex_from_unconstrained(u), True
    return simplex_from_unconstrained(u), False


def pool_experiment(
    data_source: DataSource,
    families: Sequence[Union[ModelFamily, str]],
    optimizer_rules: Sequence[Union[ScoringRule, str]],
    evaluation_rules: Sequence[Union[ScoringRule, str]],
    *,
    T: int | None = None,
    J: int = 1000,
    zeta: int = 50,
    refit_every: int = 1,
    seed: int = 0,
    quantile_method: str = "linear",
    keep_per_step: bool = True,
) -> ScoreMatrix:
    """Walk-forward evaluation of a linear pool of model families.

    At roll r the component parameters are fit on y[r : r+J] under the
    row's rule (every ``refit_every`` rolls), the pool weights are refit
    every roll on the one-step densities of the next ``zeta`` points,
    and the pooled forecast of y[r+J+zeta] is scored under every
    evaluation rule.  ``zeta=0`` is allowed for single-family pools,
    which then reduce exactly to a rolling single-model protocol.
    """
    fams = [_as_family(f) for f in families]
    if not fams:
        raise ParameterError("pool_experiment: need at least one family")
    opt_rules = _as_rules(optimizer_rules)
    eval_rules = _as_rules(evaluation_rules)
    y = _materialize(data_source, T, seed)
    total = y.size
    n = len(fams)
    if J < 2:
        raise ParameterError(f"J={J} is too small")
    if zeta < 0 or (zeta == 0 and n > 1):
        raise ParameterError(f"zeta={zeta} needs to be positive for multi-family pools")
    tau = total - J - zeta
    if tau < 1:
        raise ParameterError(f"series of length {total} leaves no evaluation step after J+zeta")
    if refit_every < 1:
        raise ParameterError(f"refit_every must be positive, got {refit_every}")
    region_keys = _region_levels(list(opt_rules) + list(eval_rules))

    n_rows, n_cols = len(opt_rules), len(eval_rules)
    cube = np.empty((tau, n_rows, n_cols))
    fallbacks = np.zeros(n_rows, dtype=int)
    weight_paths = np.empty((tau, n_rows, n), dtype=float)

    thetas: list[list[np.ndarray | None]] = [[None] * n for _ in opt_rules]
    weights: list[np.ndarray | None] = [None] * n_rows

    for r in range(tau):
        fit_win = y[r : r + J]
        regions = _resolve_regions(fit_win, region_keys, quantile_method) if region_keys else {}
        # Component one-step moments over the roll, shared across rules
        # only if parameters agree, so computed per rule below.
        for i, opt_rule in enumerate(opt_rules):
            rule_i = _attach_region(opt_rule, regions)
            if r % refit_every == 0:
                for k, fam in enumerate(fams):
                    theta_new, fell_back = _refit(fam, fit_win, rule_i, thetas[i][k], seed)
                    if theta_new is None:
                        raise ExperimentError(
                            f"optimization failed at the first roll for {fam.name} under {opt_rule.label}"
                        )
                    if fell_back:
                        fallbacks[i] += 1
                    thetas[i][k] = theta_new
            means = np.empty((zeta + 1, n))
            variances = np.empty((zeta + 1, n))
            for k, fam in enumerate(fams):
                mu, var = fam.predictive_moments(thetas[i][k], y[r : r + J + zeta])
                means[:, k] = mu[J - 1 :]
                variances[:, k] = var[J - 1 :]
            if n == 1:
                w = np.array([1.0])
            else:
                scorer = PoolScorer(
                    means[:-1], variances[:-1], y[r + J : r + J + zeta], rule_i
                )
                w, fell_back = _fit_weights(
                    scorer, weights[i], seed, f"pool:{opt_rule.label}"
                )
                if fell_back:
                    fallbacks[i] += 1
                weights[i] = w
            weight_paths[r, i] = w
            target = y[r + J + zeta : r + J + zeta + 1]
            for j, eval_rule in enumerate(eval_rules):
                cube[r, i, j] = mixture_scores(
                    _attach_region(eval_rule, regions),
                    w,
                    means[-1:, :],
                    variances[-1:, :],
                    target,
                )[0]

    entries = cube.mean(axis=0)
    floor_counts = (cube == LOG_FLOOR).sum(axis=0).astype(int)
    counts = np.full((n_rows, n_cols), tau, dtype=int)
    return ScoreMatrix(
        optimizer_rules=tuple(r.label for r in opt_rules),
        evaluation_rules=tuple(r.label for r in eval_rules),
        entries=entries,
        tau=tau,
        counts=counts,
        floor_counts=floor_counts,
        fallback_counts=fallbacks,
        per_step_scores=cube if keep_per_step else None,
        meta={
            "protocol": "pool",
            "families": [f.name for f in fams],
            "J": J,
            "zeta": zeta,
            "refit_every": refit_every,
            "seed": seed,
            "T": total,
            "final_weights": {
                r.label: weight_paths[-1, i].tolist() for i, r in enumerate(opt_rules)
            },
        },
    )


# ---------------------------------------------------------------------------
# rendering


def render_table(
    matrix: ScoreMatrix,
    *,
    fmt: str = "markdown",
    mark_best: bool = True,
    mark_second: bool = True,
) -> str:
    """Deterministic table of a score matrix, rounded to 3 decimals.

    Rounding follows IEEE round-half-even (the behavior of ``format``).
    Column maxima are marked on the rounded values, so display ties are
    marked together: bold in Markdown, a ``*`` suffix in text and CSV.
    Second-best values get italics or a ``+`` suffix.

    Args:
        fmt: one of ``markdown``, ``text``, ``csv``.
    """
    if fmt not in ("markdown", "text", "csv"):
        raise ParameterError(f"render_table: unknown format {fmt!r}")
    rounded = [[f"{v:.3f}" for v in row] for row in matrix.entries]
    n_rows = len(matrix.optimizer_rules)
    n_cols = len(matrix.evaluation_rules)

    best: list[set[int]] = []
    second: list[set[int]] = []
    for j in range(n_cols):
        column = [float(rounded[i][j]) for i in range(n_rows)]
        top = max(column)
        best.append({i for i, v in enumerate(column) if v == top})
        runners = [v for v in column if v != top]
        if runners and mark_second:
            runner_up = max(runners)
            second.append({i for i, v in enumerate(column) if v == runner_up})
        else:
            second.append(set())

    def decorate(i: int, j: int) -> str:
        text = rounded[i][j]
        if mark_best and i in best[j]:
            return f"**{text}**" if fmt == "markdown" else f"{text}*"
        if mark_second and i in second[j]:
            return f"*{text}*" if fmt == "markdown" else f"{text}+"
        return text

    header = ["optimizer \\ evaluation" if fmt == "markdown" else "optimizer"] + list(
        matrix.evaluation_rules
    )
    body = [
        [matrix.optimizer_rules[i]] + [decorate(i, j) for j in range(n_cols)]
        for i in range(n_rows)
    ]

    if fmt == "csv":
        lines = [",".join(header)] + [",".join(row) for row in body]
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join(["---"] * len(header)) + "|",
        ]
        lines += ["| " + " | ".join(row) + " |" for row in body]
        return "\n".join(lines) + "\n"
    widths = [max(len(r[c]) for r in [header] + body) for c in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in body]
    return "\n".join(lines) + "\n"
