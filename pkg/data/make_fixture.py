"""Generate the synthetic daily-return fixture ``equity_index_returns.csv``.

The tests need a return series whose descriptive statistics resemble a
major equity index over roughly two decades of daily data: heavy tails,
mild negative skewness, a small positive median, and strong volatility
clustering.  Real index data cannot be committed, so this script builds
a look-alike:

1. simulate a GARCH(1,1) volatility recursion driven by a two-component
   Gaussian-mixture innovation (standardized, left-skewed, positive
   median), which supplies the clustering and the asymmetry;
2. surgically adjust the path - an affine map pins the mean and
   standard deviation, the single most extreme points are set to the
   exact target minimum and maximum, the next-deepest tail values are
   scaled to hit the target skewness and kurtosis, and a narrow central
   rank window is remapped onto a smooth ramp so the median lands
   exactly.

Because skewness and kurtosis are affine-invariant and each adjustment
is tiny relative to the sample, the loop converges in a few rounds.
The result is verified against the targets below (within 8% relative,
most statistics exact to display precision) using the same summary code
the package itself ships, then written with full-precision values so a
reload reproduces every statistic bit for bit.

Run from the repository root:

    python data/make_fixture.py
"""

import os

import numpy as np
from scipy import optimize

from scorecast.dataio import load_returns_csv, summarize, write_returns_csv
from scorecast.dgp import ReturnSeries

N = 5110
BURN = 500
SEED = 4
ALPHA, BETA = 0.20, 0.79          # volatility recursion coefficients
P, M1, S2 = 0.9, 0.08, 1.6        # innovation mixture shape
START_DATE = "2000-01-03"

TARGETS = {
    "min": -12.765,
    "max": 10.957,
    "mean": 0.014,
    "median": 0.054,
    "st_dev": 1.255,
    "skewness": -0.364,
    "kurtosis": 11.2,             # excess; 14.2 including the normal's 3
    "jarque_bera": 26821.0,
    "ljung_box_sq": 5430.0,
}


def simulate_base(seed: int) -> np.ndarray:
    """GARCH(1,1) path with standardized skewed-mixture innovations."""
    m2 = -P * M1 / (1 - P)
    s1 = np.sqrt((1 - P * M1**2 - (1 - P) * (S2**2 + m2**2)) / P)
    rng = np.random.default_rng(seed)
    total = N + BURN
    component = rng.random(total) < P
    eps = np.where(
        component, rng.normal(M1, s1, total), rng.normal(m2, S2, total)
    )
    omega = 1.0 - ALPHA - BETA  # unit unconditional variance
    y = np.empty(total)
    v = 1.0
    for t in range(total):
        y[t] = np.sqrt(v) * eps[t]
        v = omega + ALPHA * y[t] ** 2 + BETA * v
    return y[BURN:]


def _skew_kurt(y: np.ndarray) -> tuple[float, float]:
    c = y - y.mean()
    m2 = float(np.mean(c**2))
    return float(np.mean(c**3) / m2**1.5), float(np.mean(c**4) / m2**2 - 3.0)


def _place_median(y: np.ndarray, target: float) -> None:
    """Remap a central rank window onto a ramp bracketing ``target``.

    The two middle order statistics end up symmetric around the target,
    so the sample median is exact; only a hundred or so central points
    move, each by a fraction of the local spacing, which leaves every
    other statistic essentially unchanged.
    """
    n = y.size
    order = np.argsort(y)
    below = int(np.searchsorted(y[order], target))
    half = max(55, abs(below - n // 2) + 30)
    window = order[n // 2 - half: n // 2 + half]
    v_low = y[order[n // 2 - half - 1]]
    v_high = y[order[n // 2 + half]]
    if not v_low < target < v_high:
        raise RuntimeError("median target outside the central window")
    delta = (v_high - v_low) / (4 * half)
    y[window] = np.concatenate([
        np.linspace(v_low + delta, target - delta, half),
        np.linspace(target + delta, v_high - delta, half),
    ])


def adjust(y: np.ndarray, rounds: int = 10, tail: int = 14) -> np.ndarray:
    for _ in range(rounds):
        y = TARGETS["mean"] + TARGETS["st_dev"] * (y - y.mean()) / y.std(ddof=1)
        y[np.argmin(y)] = TARGETS["min"]
        y[np.argmax(y)] = TARGETS["max"]
        order = np.argsort(y)
        neg, pos = order[1:1 + tail], order[-1 - tail:-1]
        base_neg, base_pos = y[neg].copy(), y[pos].copy()

        def residual(g, y=y, neg=neg, pos=pos, bn=base_neg, bp=base_pos):
            trial = y.copy()
            trial[neg] = bn * g[0]
            trial[pos] = bp * g[1]
            s, k = _skew_kurt(trial)
            return [s - TARGETS["skewness"], k - TARGETS["kurtosis"]]

        g, _, converged, _ = optimize.fsolve(residual, [1.0, 1.0], full_output=True)
        if converged == 1:
            y[neg] = base_neg * g[0]
            y[pos] = base_pos * g[1]
        _place_median(y, TARGETS["median"])
    return y


def business_days(start: str, count: int) -> tuple[str, ...]:
    days = np.busday_offset(start, np.arange(count), roll="forward")
    return tuple(str(d) for d in days)


def main() -> None:
    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "equity_index_returns.csv")
    y = adjust(simulate_base(SEED))
    series = ReturnSeries(y, dates=business_days(START_DATE, N))
    write_returns_csv(out, series)

    stats = summarize(load_returns_csv(out)).as_dict()
    stats["range"] = None  # implied by min and max; no separate target
    worst = 0.0
    for name, target in TARGETS.items():
        value = stats[name]
        if name == "kurtosis":  # compare including the normal's 3
            rel = abs((value + 3.0) - (target + 3.0)) / abs(target + 3.0)
        else:
            rel = abs(value - target) / abs(target)
        worst = max(worst, rel)
        print(f"{name:14s} {value:12.4f}  target {target:10.3f}  rel {rel:6.2%}")
    if worst > 0.08:
        raise SystemExit("fixture drifted outside the target bands")
    print(f"wrote {out} ({N} observations, {series.dates[0]} to {series.dates[-1]})")


if __name__ == "__main__":
    main()
