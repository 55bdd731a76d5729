"""Experiment configuration: TOML parsing, defaults, and validation.

A configuration is a single TOML document.  Top-level keys name the
experiment kind, seed, rule lists, and window sizes; the data source is
either a nested ``[dgp]`` table (simulated) or an ``input`` path (CSV).
``parse_config`` raises :class:`ConfigError` listing every structural
problem (syntax, types, unknown keys); ``validate_config`` returns a
list of semantic diagnostics, empty meaning runnable.

Re-running from a manifest is supported by ``load_config``, which
accepts either a TOML file or a JSON run manifest embedding the
original configuration text.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from .dgp import Arma11, DgpSpec, GarchT, GaussianArch1, NormalMixture, StdNormal, StudentT
from .errors import ConfigError, ParameterError, ParseError
from .models import FAMILIES
from .scores import ScoringRule

KINDS = (
    "simulate",
    "single_model",
    "pool",
    "empirical",
    "gw",
    "tau_star",
    "score_density",
    "summarize",
)

__all__ = ["ExperimentConfig", "KINDS", "parse_config", "load_config", "validate_config", "build_dgp"]


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully parsed experiment description.

    ``dgp`` is kept as the raw mapping from the configuration file;
    ``build_dgp`` turns it into a process specification.  ``config_text``
    preserves the exact source text for the run manifest.
    """

    kind: str
    seed: int = 0
    out_prefix: str | None = None
    out_dir: str | None = None
    dgp: dict | None = None
    input: str | None = None
    column_spec: str = "returns"
    model: str | None = None
    families: tuple[str, ...] = ()
    rules: tuple[str, ...] = ()
    evaluation_rules: tuple[str, ...] | None = None
    T: int | None = None
    tau: int | None = None
    est_start: int = 1000
    refit_every: int = 1
    window: str = "expanding"
    J: int = 1000
    zeta: int = 50
    M: int = 500
    alpha: float = 0.05
    pairs: tuple[tuple[str, str], ...] | None = None
    config_text: str = ""

    @property
    def all_rules(self) -> tuple[str, ...]:
        """Optimizer rules plus evaluation rules (defaulting to the former)."""
        return self.rules if self.evaluation_rules is None else self.evaluation_rules

    def resolved_T(self) -> int | None:
        """Series length implied by the configuration, if determinable."""
        if self.T is not None:
            return self.T
        if self.tau is None:
            return None
        if self.kind == "pool":
            return self.J + self.zeta + self.tau
        return self.est_start + self.tau


_SCALARS = {
    "kind": str,
    "seed": int,
    "out_prefix": str,
    "out_dir": str,
    "input": str,
    "column_spec": str,
    "model": str,
    "T": int,
    "tau": int,
    "est_start": int,
    "refit_every": int,
    "window": str,
    "J": int,
    "zeta": int,
    "M": int,
    "alpha": float,
}
_STRING_LISTS = ("families", "rules", "evaluation_rules")


def _coerce_scalar(name: str, value, target: type, problems: list[str]):
    if target is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if target is int and (isinstance(value, bool) or not isinstance(value, int)):
        problems.append(f"{name}: expected an integer, got {value!r}")
        return None
    if not isinstance(value, target):
        problems.append(f"{name}: expected {target.__name__}, got {value!r}")
        return None
    return value


def _coerce_string_list(name: str, value, problems: list[str]):
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        problems.append(f"{name}: expected a list of strings, got {value!r}")
        return None
    return tuple(value)


def parse_config(text: str) -> ExperimentConfig:
    """Parse TOML configuration text into an :class:`ExperimentConfig`.

    Raises:
        ConfigError: with one diagnostic per structural problem.
    """
    try:
        mapping = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"configuration is not valid TOML: {exc}") from exc
    problems: list[str] = []
    known = {f.name for f in fields(ExperimentConfig)} - {"config_text"}
    values: dict = {"config_text": text}
    for key, value in mapping.items():
        if key not in known:
            problems.append(f"{key}: unknown key")
            continue
        if key == "dgp":
            if not isinstance(value, dict):
                problems.append(f"dgp: expected a table, got {value!r}")
            else:
                values["dgp"] = value
        elif key == "pairs":
            if not isinstance(value, list) or any(
                not (isinstance(p, list) and len(p) == 2 and all(isinstance(r, str) for r in p))
                for p in value
            ):
                problems.append("pairs: expected a list of [rule_j, rule_i] string pairs")
            else:
                values["pairs"] = tuple((p[0], p[1]) for p in value)
        elif key in _STRING_LISTS:
            coerced = _coerce_string_list(key, value, problems)
            if coerced is not None:
                values[key] = coerced
        else:
            coerced = _coerce_scalar(key, value, _SCALARS[key], problems)
            if coerced is not None:
                values[key] = coerced
    if "kind" not in values and not any(p.startswith("kind:") for p in problems):
        problems.append("kind: required")
    elif "kind" in values and values["kind"] not in KINDS:
        problems.append(f"kind: must be one of {', '.join(KINDS)}; got {values['kind']!r}")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(**values)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Load a configuration from a TOML file or a JSON run manifest."""
    path = os.fspath(path)
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            manifest = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid TOML or JSON manifest: {exc}") from exc
        if not isinstance(manifest, dict) or "config_text" not in manifest:
            raise ConfigError(f"{path}: JSON manifest lacks a 'config_text' entry")
        return parse_config(manifest["config_text"])
    return parse_config(text)


# ---------------------------------------------------------------------------
# dgp construction

_DGP_FIELDS = {
    "gaussian_arch1": ("c", "a"),
    "garch_t": ("c", "a", "b", "nu"),
    "arma11": ("intercept", "ar", "ma"),
}


def _build_error_dist(mapping: dict):
    kind = mapping.get("kind")
    if kind == "normal":
        extra = set(mapping) - {"kind"}
        if extra:
            raise ConfigError(f"dgp.error: unknown keys {sorted(extra)}")
        return StdNormal()
    if kind == "t":
        extra = set(mapping) - {"kind", "nu", "standardized"}
        if extra:
            raise ConfigError(f"dgp.error: unknown keys {sorted(extra)}")
        if "nu" not in mapping:
            raise ConfigError("dgp.error: nu is required for t innovations")
        return StudentT(float(mapping["nu"]), bool(mapping.get("standardized", True)))
    if kind == "mixture":
        needed = {"p", "mu1", "sigma1", "mu2", "sigma2"}
        extra = set(mapping) - needed - {"kind"}
        if extra:
            raise ConfigError(f"dgp.error: unknown keys {sorted(extra)}")
        missing = needed - set(mapping)
        if missing:
            raise ConfigError(f"dgp.error: missing keys {sorted(missing)}")
        return NormalMixture(*(float(mapping[k]) for k in ("p", "mu1", "sigma1", "mu2", "sigma2")))
    raise ConfigError(f"dgp.error.kind: must be 'normal', 't', or 'mixture'; got {kind!r}")


def build_dgp(mapping: dict) -> DgpSpec:
    """Build a process specification from a ``[dgp]`` table.

    Raises:
        ConfigError: for unknown kinds, missing or extra keys, or
            parameter values outside the process domain.
    """
    kind = mapping.get("kind")
    if kind not in _DGP_FIELDS:
        raise ConfigError(
            f"dgp.kind: must be one of {', '.join(_DGP_FIELDS)}; got {kind!r}"
        )
    required = _DGP_FIELDS[kind]
    allowed = set(required) | {"kind", "burn_in"}
    if kind == "arma11":
        allowed.add("error")
    extra = set(mapping) - allowed
    if extra:
        raise ConfigError(f"dgp: unknown keys {sorted(extra)} for kind {kind!r}")
    missing = [k for k in required if k not in mapping]
    if missing:
        raise ConfigError(f"dgp: missing keys {missing} for kind {kind!r}")
    numbers = {}
    for key in required:
        value = mapping[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"dgp.{key}: expected a number, got {value!r}")
        numbers[key] = float(value)
    kwargs: dict = dict(numbers)
    if "burn_in" in mapping:
        burn = mapping["burn_in"]
        if isinstance(burn, bool) or not isinstance(burn, int):
            raise ConfigError(f"dgp.burn_in: expected an integer, got {burn!r}")
        kwargs["burn_in"] = burn
    if kind == "arma11" and "error" in mapping:
        if not isinstance(mapping["error"], dict):
            raise ConfigError("dgp.error: expected a table")
        kwargs["error"] = _build_error_dist(mapping["error"])
    cls = {"gaussian_arch1": GaussianArch1, "garch_t": GarchT, "arma11": Arma11}[kind]
    try:
        return cls(**kwargs)
    except ParameterError as exc:
        raise ConfigError(f"dgp: {exc}") from exc


# ---------------------------------------------------------------------------
# semantic validation

_NEEDS_DATA = ("single_model", "pool", "gw", "tau_star", "score_density")
_NEEDS_RULES = ("single_model", "pool", "empirical", "gw", "tau_star", "score_density")


def _check_rules(label: str, rules, problems: list[str]) -> list[str]:
    parsed: list[str] = []
    for k, text in enumerate(rules):
        try:
            ScoringRule.parse(text)
        except (ParseError, ParameterError) as exc:
            problems.append(f"{label}[{k}]: {exc}")
        else:
            parsed.append(text)
    return parsed


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Full semantic validation; an empty list means the config is runnable."""
    problems: list[str] = []
    kind = cfg.kind

    if cfg.seed < 0:
        problems.append(f"seed: must be nonnegative, got {cfg.seed}")
    for name in ("T", "tau"):
        value = getattr(cfg, name)
        if value is not None and value < 2:
            problems.append(f"{name}: must be at least 2, got {value}")
    for name in ("est_start", "refit_every", "J", "M"):
        value = getattr(cfg, name)
        if value < 1:
            problems.append(f"{name}: must be positive, got {value}")
    if cfg.zeta < 0:
        problems.append(f"zeta: must be nonnegative, got {cfg.zeta}")
    if not 0.0 < cfg.alpha < 1.0:
        problems.append(f"alpha: must lie in (0, 1), got {cfg.alpha}")
    if cfg.window not in ("expanding", "rolling"):
        problems.append(f"window: must be 'expanding' or 'rolling', got {cfg.window!r}")
    if cfg.column_spec not in ("returns", "prices"):
        problems.append(f"column_spec: must be 'returns' or 'prices', got {cfg.column_spec!r}")

    good_opt = _check_rules("rules", cfg.rules, problems)
    good_eval = list(good_opt)
    if cfg.evaluation_rules is not None:
        good_eval = _check_rules("evaluation_rules", cfg.evaluation_rules, problems)

    if kind in _NEEDS_RULES and not cfg.rules:
        problems.append(f"rules: required for kind {kind!r}")

    # data source
    if kind in ("empirical", "summarize"):
        if cfg.input is None:
            problems.append(f"input: required for kind {kind!r}")
        if cfg.dgp is not None:
            problems.append(f"dgp: not allowed for kind {kind!r}; supply input instead")
    elif kind == "simulate" or (kind in _NEEDS_DATA and cfg.input is None):
        if cfg.dgp is None:
            problems.append(f"dgp: required for kind {kind!r} without an input path")
    if cfg.input is not None and not os.path.isfile(cfg.input):
        problems.append(f"input: file not found: {cfg.input}")
    if cfg.dgp is not None:
        try:
            build_dgp(cfg.dgp)
        except ConfigError as exc:
            problems.extend(exc.diagnostics or [str(exc)])
        if cfg.input is not None:
            problems.append("dgp: cannot combine a process spec with an input path")
        elif cfg.resolved_T() is None:
            problems.append("T: required with a simulated data source (or set tau)")
        elif cfg.T is not None and cfg.tau is not None:
            implied = cfg.est_start + cfg.tau if kind != "pool" else cfg.J + cfg.zeta + cfg.tau
            if implied != cfg.T:
                problems.append(f"tau: inconsistent with T (tau implies T={implied}, got T={cfg.T})")

    # model specification
    if kind in ("single_model", "gw", "tau_star", "score_density"):
        if cfg.model is None:
            problems.append(f"model: required for kind {kind!r}")
        elif cfg.model not in FAMILIES:
            problems.append(f"model: unknown family {cfg.model!r}; known: {', '.join(sorted(FAMILIES))}")
    if kind == "pool" or (kind == "empirical" and not cfg.model):
        if not cfg.families:
            problems.append(f"families: required for kind {kind!r}")
    if kind == "empirical" and cfg.model is not None and cfg.model not in FAMILIES:
        problems.append(f"model: unknown family {cfg.model!r}; known: {', '.join(sorted(FAMILIES))}")
    for k, name in enumerate(cfg.families):
        if name not in FAMILIES:
            problems.append(f"families[{k}]: unknown family {name!r}; known: {', '.join(sorted(FAMILIES))}")
    if kind == "pool" and cfg.zeta == 0 and len(cfg.families) > 1:
        problems.append("zeta: must be positive for pools with more than one family")

    # window arithmetic on simulated sources with a known length
    T = cfg.resolved_T()
    if T is not None and cfg.dgp is not None:
        if kind in ("single_model", "gw", "tau_star") and T - cfg.est_start < 1:
            problems.append(f"est_start: leaves no evaluation steps (T={T}, est_start={cfg.est_start})")
        if kind == "pool" and T - cfg.J - cfg.zeta < 1:
            problems.append(f"zeta: J + zeta leaves no evaluation steps (T={T}, J={cfg.J}, zeta={cfg.zeta})")

    # pair lists for gw / tau_star
    if cfg.pairs is not None:
        if kind not in ("gw", "tau_star"):
            problems.append(f"pairs: only meaningful for kinds 'gw' and 'tau_star', not {kind!r}")
        for k, (rule_j, rule_i) in enumerate(cfg.pairs):
            for role, rule in (("rule_j", rule_j), ("rule_i", rule_i)):
                try:
                    ScoringRule.parse(rule)
                except (ParseError, ParameterError) as exc:
                    problems.append(f"pairs[{k}].{role}: {exc}")
                    continue
                if rule not in good_opt:
                    problems.append(f"pairs[{k}].{role}: {rule!r} is not among rules")
            if rule_j in good_opt and rule_j not in good_eval:
                problems.append(f"pairs[{k}].rule_j: {rule_j!r} is not among evaluation rules")

    if cfg.out_dir is not None and os.path.isdir(cfg.out_dir) and not os.access(cfg.out_dir, os.W_OK):
        problems.append(f"out_dir: not writable: {cfg.out_dir}")
    return problems
