"""Command line front door: ``scorecast run|validate --config FILE``.

``run`` executes the experiment named by the configuration and writes
its artifacts (score matrices as CSV and Markdown, coherence verdicts,
test and curve CSVs, density CSVs) plus a JSON run manifest into the
output directory.  The manifest embeds the exact configuration text,
the seed, the package version, and all diagnostic counters; feeding the
manifest back to ``run --config`` reproduces every output bit for bit.

Exit codes: 0 success, 2 configuration failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ExperimentConfig, build_dgp, load_config, validate_config
from .dgp import ReturnSeries, simulate
from . import dataio
from .errors import ConfigError, ExperimentError, ScorecastError
from .evaluation import (
    coherence_verdict,
    pool_experiment,
    render_table,
    single_model_experiment,
)
from .inference import (
    gw_statistic,
    sandwich_covariance,
    score_density_simulation,
    tau_star_from_matrix,
)
from .models import get_family
from .optimizer import optimal_score_estimate
from .rng import substream
from .scores import ScoringRule

__all__ = ["main"]


def _safe(label: str) -> str:
    return label.replace("@", "-").replace(":", "-")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


class _Runner:
    """Shared plumbing for all experiment kinds: data, emission, manifest."""

    def __init__(self, cfg: ExperimentConfig, out_dir: str):
        self.cfg = cfg
        self.out_dir = out_dir
        self.prefix = cfg.out_prefix or cfg.kind
        self.stage = "setup"
        self.outputs: list[str] = []
        self.counters: dict = {}

    def path(self, suffix: str) -> str:
        name = f"{self.prefix}_{suffix}"
        self.outputs.append(name)
        return os.path.join(self.out_dir, name)

    def load_series(self) -> ReturnSeries:
        self.stage = "loading input data"
        series = dataio.load_returns_csv(self.cfg.input, self.cfg.column_spec)
        T = self.cfg.T
        if T is not None:
            if T > len(series):
                raise ExperimentError(
                    f"T={T} exceeds the {len(series)} observations in {self.cfg.input}"
                )
            dates = series.dates[:T] if series.dates is not None else None
            series = ReturnSeries(series.values[:T], dates)
        return series

    def data_source(self):
        """(source, T) pair ready for the experiment protocols."""
        if self.cfg.input is not None:
            return self.load_series(), None
        return build_dgp(self.cfg.dgp), self.cfg.resolved_T()

    def series_values(self) -> np.ndarray:
        if self.cfg.input is not None:
            return self.load_series().values
        self.stage = "simulating data"
        spec = build_dgp(self.cfg.dgp)
        return simulate(spec, self.cfg.resolved_T(), substream(self.cfg.seed, "dgp")).values

    def emit_matrix(self, matrix, tag: str = "") -> None:
        self.stage = "writing outputs"
        stem = f"{tag}_matrix" if tag else "matrix"
        dataio.write_matrix_csv(self.path(f"{stem}.csv"), matrix)
        dataio.atomic_write_text(self.path(f"{stem}.md"), render_table(matrix, fmt="markdown"))
        if all(r in matrix.optimizer_rules for r in matrix.evaluation_rules):
            verdict = coherence_verdict(matrix)
            dataio.write_verdict_csv(self.path(f"{stem.replace('matrix', 'verdict')}.csv"), verdict)
        key = f"{tag}_scores" if tag else "scores"
        self.counters[key] = {
            "floored_scores": int(matrix.floor_counts.sum()),
            "optimizer_fallbacks": {
                rule: int(n) for rule, n in zip(matrix.optimizer_rules, matrix.fallback_counts)
            },
        }
        if "final_weights" in matrix.meta:
            self.counters[key]["final_weights"] = _jsonable(matrix.meta["final_weights"])

    def single_model_matrix(self, family: str, keep_per_step: bool, tag: str = ""):
        cfg = self.cfg
        source, T = self.data_source()
        self.stage = f"single-model experiment ({family})"
        matrix = single_model_experiment(
            source,
            family,
            cfg.rules,
            cfg.all_rules,
            T=T,
            est_start=cfg.est_start,
            refit_every=cfg.refit_every,
            seed=cfg.seed,
            window=cfg.window,
            keep_per_step=keep_per_step,
        )
        self.emit_matrix(matrix, tag)
        return matrix

    def write_manifest(self) -> str:
        manifest = {
            "package": "scorecast",
            "version": __version__,
            "kind": self.cfg.kind,
            "seed": self.cfg.seed,
            "config_text": self.cfg.config_text,
            "outputs": sorted(self.outputs),
            "counters": _jsonable(self.counters),
        }
        name = f"{self.prefix}_manifest.json"
        dataio.atomic_write_text(
            os.path.join(self.out_dir, name),
            json.dumps(manifest, sort_keys=True, indent=2) + "\n",
        )
        return name


# ---------------------------------------------------------------------------
# one handler per experiment kind


def _run_simulate(r: _Runner) -> None:
    r.stage = "simulating data"
    spec = build_dgp(r.cfg.dgp)
    series = simulate(spec, r.cfg.resolved_T(), substream(r.cfg.seed, "dgp"))
    r.stage = "writing outputs"
    dataio.write_returns_csv(r.path("series.csv"), series)


def _run_single_model(r: _Runner) -> None:
    r.single_model_matrix(r.cfg.model, keep_per_step=False)


def _run_pool(r: _Runner) -> None:
    cfg = r.cfg
    source, T = r.data_source()
    r.stage = "pool experiment"
    matrix = pool_experiment(
        source,
        cfg.families,
        cfg.rules,
        cfg.all_rules,
        T=T,
        J=cfg.J,
        zeta=cfg.zeta,
        refit_every=cfg.refit_every,
        seed=cfg.seed,
        keep_per_step=False,
    )
    r.emit_matrix(matrix)


def _run_empirical(r: _Runner) -> None:
    cfg = r.cfg
    series = r.load_series()
    r.stage = "summary statistics"
    dataio.write_summary_csv(r.path("summary.csv"), dataio.summarize(series))
    families = cfg.families if cfg.families else (cfg.model,)
    for family in families:
        r.stage = f"single-model experiment ({family})"
        matrix = single_model_experiment(
            series,
            family,
            cfg.rules,
            cfg.all_rules,
            est_start=cfg.est_start,
            refit_every=cfg.refit_every,
            seed=cfg.seed,
            window=cfg.window,
            keep_per_step=False,
        )
        r.emit_matrix(matrix, tag=family)
    if len(families) > 1:
        r.stage = "pool experiment"
        matrix = pool_experiment(
            series,
            families,
            cfg.rules,
            cfg.all_rules,
            J=cfg.J,
            zeta=cfg.zeta,
            refit_every=cfg.refit_every,
            seed=cfg.seed,
            keep_per_step=False,
        )
        r.emit_matrix(matrix, tag="pool")


def _shared_pairs(matrix, pairs, include_diagonal: bool):
    if pairs is not None:
        return list(pairs)
    shared = [x for x in matrix.evaluation_rules if x in matrix.optimizer_rules]
    return [(j, i) for j in shared for i in shared if include_diagonal or i != j]


def _run_gw(r: _Runner) -> None:
    matrix = r.single_model_matrix(r.cfg.model, keep_per_step=True)
    r.stage = "equal-predictive-ability tests"
    rows: list[tuple] = [("rule_j", "rule_i", "z", "p_value", f"reject_at_{r.cfg.alpha:g}")]
    for rule_j, rule_i in _shared_pairs(matrix, r.cfg.pairs, include_diagonal=False):
        z, p = gw_statistic(matrix.delta_series(rule_j, against=rule_i))
        rows.append((rule_j, rule_i, repr(z), repr(p), int(p < r.cfg.alpha)))
    r.stage = "writing outputs"
    dataio.atomic_write_text(
        r.path("gw.csv"), "\n".join(",".join(str(c) for c in row) for row in rows) + "\n"
    )


def _run_tau_star(r: _Runner) -> None:
    matrix = r.single_model_matrix(r.cfg.model, keep_per_step=True)
    r.stage = "break-even sample-size curves"
    curves = tau_star_from_matrix(matrix, pairs=r.cfg.pairs, alpha=r.cfg.alpha)
    r.stage = "writing outputs"
    for curve in curves:
        name = f"tau_star_{_safe(curve.rule_j)}_vs_{_safe(curve.rule_i)}.csv"
        dataio.write_tau_star_csv(r.path(name), curve)


def _run_score_density(r: _Runner) -> None:
    cfg = r.cfg
    y = r.series_values()
    family = get_family(cfg.model)
    opt_rules = [ScoringRule.parse(text).resolve(y) for text in cfg.rules]
    thetas = []
    covariances = []
    clip_counter: dict[str, int] = {}
    for rule in opt_rules:
        r.stage = f"fitting under {rule.label}"
        report = optimal_score_estimate(family, y, rule, seed=cfg.seed)
        thetas.append(report.argmax)
        r.stage = f"covariance under {rule.label}"
        covariances.append(sandwich_covariance(family, report.argmax, y, rule))
    r.stage = "simulating score densities"
    samples = score_density_simulation(
        family, opt_rules, thetas, covariances, y, cfg.all_rules, M=cfg.M, seed=cfg.seed
    )
    for sample in samples:
        key = f"{sample.evaluation_rule}|{sample.optimizer_rule}"
        clip_counter[key] = int(sample.clip_count)
    r.counters["clipped_draws"] = clip_counter
    r.stage = "writing outputs"
    dataio.write_density_csv(r.path("density.csv"), samples)
    rows = [("rule_i", "rule_j", "point_score")]
    rows.extend(
        (s.evaluation_rule, s.optimizer_rule, repr(float(s.point_score))) for s in samples
    )
    dataio.atomic_write_text(
        r.path("density_points.csv"),
        "\n".join(",".join(str(c) for c in row) for row in rows) + "\n",
    )


def _run_summarize(r: _Runner) -> None:
    series = r.load_series()
    r.stage = "summary statistics"
    dataio.write_summary_csv(r.path("summary.csv"), dataio.summarize(series))


_RUNNERS = {
    "simulate": _run_simulate,
    "single_model": _run_single_model,
    "pool": _run_pool,
    "empirical": _run_empirical,
    "gw": _run_gw,
    "tau_star": _run_tau_star,
    "score_density": _run_score_density,
    "summarize": _run_summarize,
}


# ---------------------------------------------------------------------------
# entry points


def _fail(messages, stream=None) -> None:
    stream = sys.stderr if stream is None else stream
    for message in messages:
        print(f"scorecast: {message}", file=stream)


def _load_and_validate(config_path: str):
    try:
        cfg = load_config(config_path)
    except OSError as exc:
        return None, [f"cannot read config: {exc}"]
    except ConfigError as exc:
        return None, exc.diagnostics
    return cfg, validate_config(cfg)


def run(config_path: str, out_dir: str | None = None) -> int:
    """Execute a configuration file; returns the process exit code."""
    cfg, problems = _load_and_validate(config_path)
    if problems:
        _fail(problems)
        return 2
    target = out_dir or cfg.out_dir or "."
    try:
        os.makedirs(target, exist_ok=True)
    except OSError as exc:
        _fail([f"out_dir: {exc}"])
        return 2
    runner = _Runner(cfg, target)
    try:
        _RUNNERS[cfg.kind](runner)
    except (ScorecastError, OSError, ValueError) as exc:
        _fail([f"{cfg.kind} failed during {runner.stage}: {exc}"])
        return 3
    manifest = runner.write_manifest()
    for name in sorted(runner.outputs) + [manifest]:
        print(f"wrote {os.path.join(target, name)}")
    return 0


def validate(config_path: str) -> int:
    """Validate a configuration file; returns the process exit code."""
    cfg, problems = _load_and_validate(config_path)
    if problems:
        _fail(problems)
        return 2
    print("ok")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scorecast",
        description="Run score-driven forecasting experiments from a TOML config.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="validate, execute, and write artifacts")
    p_run.add_argument("--config", required=True, help="TOML config or JSON run manifest")
    p_run.add_argument("--out-dir", default=None, help="output directory (default: config or cwd)")
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("--config", required=True, help="TOML config or JSON run manifest")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out_dir)
    return validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
