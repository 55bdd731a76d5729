"""CSV ingestion, summary statistics, and file emission.

Input files are UTF-8 comma-separated ``date,value`` or ``value``
layouts with an optional header row.  All writers emit full-precision
floats (``repr``) so that emit/reload round-trips are exact, and write
atomically via a same-directory temp file plus ``os.replace``.

Skewness is the Pearson sample moment ratio and kurtosis is excess,
both with 1/n moment normalization (bias-uncorrected); the standard
deviation uses the n-1 denominator.
"""

from __future__ import annotations

import csv
import datetime
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dgp import ReturnSeries
from .errors import (
    DegenerateSampleError,
    InsufficientHistoryError,
    ParameterError,
    ParseError,
)

_MIN_SUMMARY_LENGTH = 30
_LB_LAGS = 10

__all__ = [
    "SeriesSummary",
    "load_returns_csv",
    "write_returns_csv",
    "summarize",
    "write_matrix_csv",
    "write_verdict_csv",
    "write_tau_star_csv",
    "write_density_csv",
    "write_summary_csv",
    "atomic_write_text",
]


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` atomically (temp file + rename)."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_rows(rows: Iterable[Sequence[object]]) -> str:
    out = []
    for row in rows:
        out.append(",".join(str(cell) for cell in row))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# loading


def _parse_value(cell: str) -> float | None:
    try:
        value = float(cell)
    except ValueError:
        return None
    return value


def _check_date(cell: str, path: str, line: int) -> str:
    text = cell.strip()
    try:
        datetime.date.fromisoformat(text)
    except ValueError:
        try:
            datetime.datetime.fromisoformat(text)
        except ValueError:
            raise ParseError(
                f"{path}: line {line}: invalid ISO-8601 date {text!r}"
            ) from None
    return text


def load_returns_csv(path: str | os.PathLike, column_spec: str = "returns") -> ReturnSeries:
    """Load a return series from a CSV file.

    Rows are either ``value`` or ``date,value``; a single leading header
    row is tolerated.  With ``column_spec="prices"`` the value column is
    read as price levels and converted to continuously compounded
    percentage returns ``100*ln(p_t / p_{t-1})``; with ``"returns"``
    (the default) values pass through unchanged.

    Raises :class:`ParseError` naming the first offending line for
    blank lines, non-numeric values, malformed dates, or inconsistent
    column counts.
    """
    if column_spec not in ("returns", "prices"):
        raise ParameterError(
            f"column_spec must be 'returns' or 'prices', got {column_spec!r}"
        )
    path = os.fspath(path)
    values: list[float] = []
    lines: list[int] = []
    dates: list[str] = []
    width = 0
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        for row in reader:
            line = reader.line_num
            cells = [cell.strip() for cell in row]
            if not cells or all(cell == "" for cell in cells):
                raise ParseError(f"{path}: line {line}: blank line")
            if len(cells) > 2:
                raise ParseError(
                    f"{path}: line {line}: expected 1 or 2 columns, got {len(cells)}"
                )
            value = _parse_value(cells[-1])
            if value is None:
                if not values and width == 0:
                    # first row with a non-numeric value column: header
                    width = len(cells)
                    continue
                raise ParseError(
                    f"{path}: line {line}: could not parse value {cells[-1]!r}"
                )
            if width == 0:
                width = len(cells)
            elif len(cells) != width:
                raise ParseError(
                    f"{path}: line {line}: expected {width} columns, got {len(cells)}"
                )
            if not math.isfinite(value):
                raise ParseError(f"{path}: line {line}: non-finite value {cells[-1]!r}")
            if len(cells) == 2:
                dates.append(_check_date(cells[0], path, line))
            values.append(value)
            lines.append(line)
    if not values:
        raise ParseError(f"{path}: no data rows")
    if column_spec == "prices":
        for value, line in zip(values, lines):
            if value <= 0.0:
                raise ParseError(
                    f"{path}: line {line}: price must be positive, got {value}"
                )
        prices = np.asarray(values)
        returns = 100.0 * np.diff(np.log(prices))
        dates = dates[1:]
    else:
        returns = np.asarray(values)
    if returns.size < 2:
        raise ParseError(f"{path}: need at least 2 observations, got {returns.size}")
    return ReturnSeries(returns, tuple(dates) if dates else None)


def write_returns_csv(path: str | os.PathLike, series: ReturnSeries) -> None:
    """Emit a return series as CSV; reloading reproduces the values exactly."""
    rows: list[Sequence[object]] = []
    if series.dates is not None:
        rows.append(("date", "value"))
        rows.extend(zip(series.dates, (repr(float(v)) for v in series.values)))
    else:
        rows.append(("value",))
        rows.extend((repr(float(v)),) for v in series.values)
    atomic_write_text(path, _format_rows(rows))


# ---------------------------------------------------------------------------
# summary statistics


@dataclass(frozen=True)
class SeriesSummary:
    """Descriptive statistics for a return series.

    ``st_dev`` uses the n-1 denominator; ``skewness`` and ``kurtosis``
    use 1/n moments, kurtosis reported in excess of 3.  ``jarque_bera``
    is n*(skew^2/6 + kurt^2/24) and ``ljung_box_sq`` is the Ljung-Box
    Q statistic on the squared series with 10 lags.
    """

    min: float
    max: float
    mean: float
    median: float
    st_dev: float
    range: float
    skewness: float
    kurtosis: float
    jarque_bera: float
    ljung_box_sq: float

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"SeriesSummary: {name} must be finite")
        if abs(self.range - (self.max - self.min)) > 1e-10 * (1.0 + abs(self.range)):
            raise ParameterError("SeriesSummary: range must equal max - min")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def _ljung_box(x: np.ndarray, lags: int) -> float:
    centered = x - x.mean()
    denom = float(np.dot(centered, centered))
    if denom == 0.0:
        raise DegenerateSampleError("ljung_box: series is constant")
    n = x.size
    q = 0.0
    for k in range(1, lags + 1):
        rho = float(np.dot(centered[k:], centered[:-k])) / denom
        q += rho * rho / (n - k)
    return n * (n + 2.0) * q


def summarize(series: ReturnSeries | np.ndarray) -> SeriesSummary:
    """Compute descriptive statistics of a return series.

    Requires at least 30 observations; a constant series (undefined
    skewness and kurtosis) raises :class:`DegenerateSampleError`.
    """
    values = series.values if isinstance(series, ReturnSeries) else np.asarray(series, dtype=float)
    n = values.size
    if n < _MIN_SUMMARY_LENGTH:
        raise InsufficientHistoryError(
            f"summarize: need at least {_MIN_SUMMARY_LENGTH} observations, got {n}"
        )
    centered = values - values.mean()
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        raise DegenerateSampleError("summarize: series is constant")
    skew = float(np.mean(centered**3)) / m2**1.5
    kurt = float(np.mean(centered**4)) / m2**2 - 3.0
    jb = n * (skew**2 / 6.0 + kurt**2 / 24.0)
    return SeriesSummary(
        min=float(values.min()),
        max=float(values.max()),
        mean=float(values.mean()),
        median=float(np.median(values)),
        st_dev=float(values.std(ddof=1)),
        range=float(values.max() - values.min()),
        skewness=skew,
        kurtosis=kurt,
        jarque_bera=jb,
        ljung_box_sq=_ljung_box(values**2, _LB_LAGS),
    )


# ---------------------------------------------------------------------------
# emission


def write_matrix_csv(path: str | os.PathLike, matrix) -> None:
    """Emit a score matrix as CSV, rule identifiers on both margins."""
    rows: list[Sequence[object]] = [("optimizer_rule", *matrix.evaluation_rules)]
    for i, label in enumerate(matrix.optimizer_rules):
        rows.append((label, *(repr(float(v)) for v in matrix.entries[i])))
    atomic_write_text(path, _format_rows(rows))


def write_verdict_csv(path: str | os.PathLike, verdict) -> None:
    """Emit a coherence verdict as CSV, one row per evaluation rule."""
    rows: list[Sequence[object]] = [("rule", "is_max_on_diagonal", "margin")]
    for rule, flag, margin in zip(verdict.rules, verdict.is_max_on_diagonal, verdict.margins):
        rows.append((rule, int(flag), repr(float(margin))))
    atomic_write_text(path, _format_rows(rows))


def write_tau_star_csv(path: str | os.PathLike, curve) -> None:
    """Emit a break-even sample-size curve as (tau, tau_star, clamped_flag)."""
    rows: list[Sequence[object]] = [("tau", "tau_star", "clamped_flag")]
    for tau, star, clamped in zip(curve.taus, curve.tau_star, curve.clamped):
        rows.append((int(tau), repr(float(star)), int(clamped)))
    atomic_write_text(path, _format_rows(rows))


def write_density_csv(path: str | os.PathLike, samples, grid_size: int = 256) -> None:
    """Emit kernel density curves of simulated average scores.

    One block of (rule_i, rule_j, s, density) rows per sample, where
    rule_i is the evaluation rule and rule_j the optimizer rule whose
    fitted model generated the draws.
    """
    from .inference import kde_curve

    rows: list[Sequence[object]] = [("rule_i", "rule_j", "s", "density")]
    for sample in samples:
        grid, density = kde_curve(sample.draws, n_grid=grid_size)
        for s, f in zip(grid, density):
            rows.append(
                (sample.evaluation_rule, sample.optimizer_rule, repr(float(s)), repr(float(f)))
            )
    atomic_write_text(path, _format_rows(rows))


def write_summary_csv(path: str | os.PathLike, summary: SeriesSummary) -> None:
    """Emit summary statistics as (statistic, value) rows."""
    rows: list[Sequence[object]] = [("statistic", "value")]
    rows.extend((name, repr(value)) for name, value in summary.as_dict().items())
    atomic_write_text(path, _format_rows(rows))
