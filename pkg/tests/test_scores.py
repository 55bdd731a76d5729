"""Scoring rules: closed forms vs quadrature, propriety, parsing, floors."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from scorecast import scores
from scorecast.errors import DegenerateSampleError, ParameterError, ParseError, ShapeError
from scorecast.models import PredictiveLaw
from scorecast.scores import LOG_FLOOR, Region, ScoringRule


def crps_quadrature(law, y):
    """CRPS from the defining integral -int [F(x) - 1{x >= y}]^2 dx."""

    def integrand(x):
        f = float(law.cdf(x))
        return (f - (x >= y)) ** 2

    lo = min(float(law.quantile(1e-10)), y) - 5.0
    hi = max(float(law.quantile(1 - 1e-10)), y) + 5.0
    value, _ = integrate.quad(integrand, lo, hi, limit=400, points=[y])
    return -value


def tail_mass_quadrature(law, region):
    if region.side == "lower":
        lo, hi = region.threshold, float(law.quantile(1 - 1e-14)) + 10.0
    else:
        lo, hi = float(law.quantile(1e-14)) - 10.0, region.threshold
    value, _ = integrate.quad(lambda x: law.pdf(x), lo, hi, limit=400)
    return value


class TestLogScore:
    def test_standard_normal_at_zero(self):
        law = PredictiveLaw.gaussian(0.0, 1.0)
        assert scores.log_score(law, 0.0) == pytest.approx(-0.5 * math.log(2 * math.pi))

    def test_center_of_any_gaussian(self):
        law = PredictiveLaw.gaussian(2.0, 3.5)
        assert scores.log_score(law, 2.0) == pytest.approx(-0.5 * math.log(2 * math.pi * 3.5))

    def test_half_half_mixture_at_zero(self):
        law = PredictiveLaw(
            weights=np.array([0.5, 0.5]),
            means=np.array([0.0, 1.0]),
            variances=np.array([1.0, 1.0]),
        )
        exact = math.log(0.5 * stats.norm.pdf(0.0) + 0.5 * stats.norm.pdf(1.0))
        assert scores.log_score(law, 0.0) == pytest.approx(exact, abs=1e-12)
        assert scores.log_score(law, 0.0) == pytest.approx(-1.1386, abs=1e-3)

    def test_underflow_floors_not_inf(self):
        law = PredictiveLaw.gaussian(0.0, 1e-4)
        value = scores.log_score(law, 100.0)
        assert value == LOG_FLOOR
        assert scores.count_floored(np.array([value, -1.0])) == 1


class TestCrps:
    def test_standard_normal_at_zero(self):
        law = PredictiveLaw.gaussian(0.0, 1.0)
        expected = -(2.0 * stats.norm.pdf(0.0) - 1.0 / math.sqrt(math.pi))
        assert scores.crps(law, 0.0) == pytest.approx(expected, abs=1e-12)
        assert scores.crps(law, 0.0) == pytest.approx(-0.23369, abs=5e-6)

    @pytest.mark.parametrize("mu,var,y", [(0.0, 1.0, 0.7), (-1.5, 4.0, 2.0), (3.0, 0.25, 3.0)])
    def test_gaussian_closed_form_vs_quadrature(self, mu, var, y):
        law = PredictiveLaw.gaussian(mu, var)
        assert scores.crps(law, y) == pytest.approx(crps_quadrature(law, y), abs=1e-8)

    def test_mixture_closed_form_vs_quadrature(self):
        law = PredictiveLaw(
            weights=np.array([0.3, 0.5, 0.2]),
            means=np.array([-2.0, 0.5, 3.0]),
            variances=np.array([0.5, 1.0, 2.0]),
        )
        for y in (-3.0, 0.0, 1.2, 4.0):
            assert scores.crps(law, y) == pytest.approx(crps_quadrature(law, y), abs=1e-7)

    @settings(max_examples=40, deadline=None)
    @given(mu=st.floats(-5, 5), var=st.floats(0.01, 9.0), y=st.floats(-5, 5))
    def test_translation_invariance(self, mu, var, y):
        shifted = scores.crps(PredictiveLaw.gaussian(mu, var), y)
        centered = scores.crps(PredictiveLaw.gaussian(0.0, var), y - mu)
        assert shifted == pytest.approx(centered, rel=1e-9, abs=1e-12)

    def test_point_forecast_limit(self):
        law = PredictiveLaw.gaussian(1.0, 1e-12)
        assert scores.crps(law, 1.0) == pytest.approx(0.0, abs=1e-5)

    def test_always_nonpositive(self):
        law = PredictiveLaw.gaussian(0.3, 2.0)
        ys = np.linspace(-6, 6, 41)
        values = np.array([scores.crps(law, y) for y in ys])
        assert np.all(values <= 0)


class TestCensoredLs:
    def test_region_covering_support_equals_ls(self):
        # a threshold beyond any mass makes A the effective whole line
        law = PredictiveLaw(
            weights=np.array([0.7, 0.3]),
            means=np.array([0.0, 2.0]),
            variances=np.array([1.0, 0.5]),
        )
        region = Region(side="lower", level=0.99, threshold=1e10)
        for y in (-3.0, 0.0, 5.0):
            assert scores.censored_ls(law, y, region) == pytest.approx(
                scores.log_score(law, y), abs=1e-12
            )

    def test_outside_scores_tail_mass(self):
        law = PredictiveLaw.gaussian(0.0, 1.0)
        region = Region(side="lower", level=0.10, threshold=-1.2815515655446004)
        # y in the complement: score = ln P(A^c) = ln 0.9
        assert scores.censored_ls(law, 1.0, region) == pytest.approx(math.log(0.9), abs=1e-9)

    def test_inside_scores_density(self):
        law = PredictiveLaw.gaussian(0.0, 1.0)
        region = Region(side="lower", level=0.10, threshold=-1.2815515655446004)
        assert scores.censored_ls(law, -2.0, region) == pytest.approx(
            stats.norm.logpdf(-2.0), abs=1e-12
        )
        assert scores.censored_ls(law, -2.0, region) == pytest.approx(-2.9189, abs=5e-5)

    def test_mixture_tail_mass_vs_quadrature(self):
        law = PredictiveLaw(
            weights=np.array([0.4, 0.6]),
            means=np.array([-1.0, 1.5]),
            variances=np.array([2.0, 0.7]),
        )
        for side, threshold in (("lower", -0.8), ("upper", 1.1)):
            region = Region(side=side, level=0.5, threshold=threshold)
            outside_y = threshold + 1.0 if side == "lower" else threshold - 1.0
            mass = tail_mass_quadrature(law, region)
            assert scores.censored_ls(law, outside_y, region) == pytest.approx(
                math.log(mass), abs=1e-7
            )

    @settings(max_examples=50, deadline=None)
    @given(
        mu=st.floats(-3, 3),
        var=st.floats(0.05, 5.0),
        y=st.floats(-6, 6),
        threshold=st.floats(-4, 4),
        side=st.sampled_from(["lower", "upper"]),
    )
    def test_density_inside_tail_mass_outside(self, mu, var, y, threshold, side):
        law = PredictiveLaw.gaussian(mu, var)
        region = Region(side=side, level=0.5, threshold=threshold)
        value = scores.censored_ls(law, y, region)
        sigma = math.sqrt(var)
        if region.contains(y):
            assert value == pytest.approx(stats.norm.logpdf(y, mu, sigma), rel=1e-9, abs=1e-9)
        else:
            if side == "lower":
                mass = stats.norm.sf(threshold, mu, sigma)
            else:
                mass = stats.norm.cdf(threshold, mu, sigma)
            assert value == pytest.approx(max(math.log(mass), LOG_FLOOR), rel=1e-7, abs=1e-9)


class TestQuantileScore:
    def test_zero_at_the_quantile(self):
        law = PredictiveLaw.gaussian(0.5, 2.0)
        q = float(law.quantile(0.25))
        assert scores.quantile_score(law, q, 0.25) == pytest.approx(0.0, abs=1e-12)

    def test_standard_normal_level_five_percent(self):
        law = PredictiveLaw.gaussian(0.0, 1.0)
        q = stats.norm.ppf(0.05)
        expected = (0.0 - q) * (0.0 - 0.05)
        assert scores.quantile_score(law, 0.0, 0.05) == pytest.approx(expected, abs=1e-9)
        assert scores.quantile_score(law, 0.0, 0.05) == pytest.approx(-0.08224, abs=5e-6)

    def test_linear_lower_tail(self):
        law = PredictiveLaw.gaussian(0.0, 1.0)
        q = float(law.quantile(0.05))
        y = q - 100.0
        assert scores.quantile_score(law, y, 0.05) == pytest.approx((y - q) * 0.95, abs=1e-8)

    def test_always_nonpositive(self):
        law = PredictiveLaw.gaussian(0.0, 1.0)
        for y in np.linspace(-4, 4, 33):
            assert scores.quantile_score(law, float(y), 0.10) <= 1e-15


class TestResolveRegion:
    def test_one_to_hundred_lower_decile(self):
        sample = np.arange(1.0, 101.0)
        region = scores.resolve_region(sample, "lower", 0.10)
        assert 10.0 <= region.threshold <= 11.0
        assert region.threshold == pytest.approx(np.quantile(sample, 0.10))

    def test_symmetric_sample_thresholds_mirror(self):
        rng = np.random.default_rng(0)
        half = rng.standard_normal(500)
        sample = np.concatenate([half, -half])  # exactly symmetric about 0
        lower = scores.resolve_region(sample, "lower", 0.10)
        upper = scores.resolve_region(sample, "upper", 0.90)
        assert lower.threshold == pytest.approx(-upper.threshold, abs=1e-12)

    def test_constant_sample_rejected(self):
        with pytest.raises(DegenerateSampleError):
            scores.resolve_region(np.full(50, 2.0), "lower", 0.10)

    def test_short_sample_rejected(self):
        with pytest.raises(DegenerateSampleError):
            scores.resolve_region(np.arange(5.0), "lower", 0.10)

    def test_membership_sides(self):
        lower = Region(side="lower", level=0.1, threshold=0.0)
        upper = Region(side="upper", level=0.9, threshold=0.0)
        assert lower.contains(-0.5) and not lower.contains(0.5)
        assert upper.contains(0.5) and not upper.contains(-0.5)
        assert lower.contains(0.0) and upper.contains(0.0)  # closed regions


class TestAverageScore:
    def test_single_element(self):
        law = PredictiveLaw.gaussian(0.0, 1.0)
        rule = ScoringRule.ls()
        assert scores.average_score([law], [0.0], rule) == pytest.approx(
            float(scores.log_score(law, 0.0))
        )

    def test_identical_predictions(self):
        law = PredictiveLaw.gaussian(0.0, 1.0)
        rule = ScoringRule.crps()
        avg = scores.average_score([law] * 5, [0.3] * 5, rule)
        assert avg == pytest.approx(float(scores.crps(law, 0.3)))

    def test_plain_mean(self):
        # scores of these two points happen to differ; mean must be midway
        law = PredictiveLaw.gaussian(0.0, 1.0)
        rule = ScoringRule.ls()
        s1 = float(scores.log_score(law, 0.0))
        s2 = float(scores.log_score(law, 2.0))
        assert scores.average_score([law, law], [0.0, 2.0], rule) == pytest.approx(
            (s1 + s2) / 2
        )

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            scores.average_score([PredictiveLaw.gaussian(0.0, 1.0)], [0.0, 1.0], ScoringRule.ls())


@pytest.fixture(scope="module")
def draws():
    return np.random.default_rng(2024).standard_normal(100_000)


class TestPropriety:
    """Monte Carlo: the true law beats misspecified rivals under every rule."""

    @pytest.mark.parametrize(
        "rule",
        [
            ScoringRule.ls(),
            ScoringRule.crps(),
            ScoringRule.cls_tail(0.10, "lower", Region("lower", 0.10, -1.2815515655446004)),
            ScoringRule.qs(0.05),
        ],
        ids=lambda r: r.label,
    )
    @pytest.mark.parametrize("rival", [(0.5, 1.0), (0.0, 2.0)])
    def test_true_law_wins(self, draws, rule, rival):
        mu = np.zeros_like(draws)
        truth = scores.gaussian_scores(rule, mu, np.ones_like(draws), draws)
        other = scores.gaussian_scores(
            rule, mu + rival[0], np.full_like(draws, rival[1]), draws
        )
        diff = truth - other
        margin = diff.mean()
        mc_se = diff.std(ddof=1) / math.sqrt(diff.size)
        assert margin > 3.0 * mc_se


class TestRuleGrammar:
    @pytest.mark.parametrize(
        "text,kind,level,side",
        [
            ("ls", "ls", None, None),
            ("crps", "crps", None, None),
            ("cls@0.10:lower", "cls", 0.10, "lower"),
            ("cls@0.90:upper", "cls", 0.90, "upper"),
            ("qs@0.05", "qs", 0.05, None),
        ],
    )
    def test_parse_and_label_round_trip(self, text, kind, level, side):
        rule = ScoringRule.parse(text)
        assert rule.kind == kind
        if level is not None:
            assert rule.level == pytest.approx(level)
        if side is not None:
            assert rule.side == side
        assert rule.label == text

    @pytest.mark.parametrize(
        "bad",
        ["", "log", "cls", "cls@1.5:lower", "cls@0.1:middle", "qs@0", "qs@1", "qs@-0.05", "crps@0.1"],
    )
    def test_rejects_malformed(self, bad):
        with pytest.raises((ParseError, ParameterError)):
            ScoringRule.parse(bad)

    def test_cls_requires_region_before_scoring(self):
        rule = ScoringRule.parse("cls@0.10:lower")
        assert rule.needs_region and not rule.resolved
        with pytest.raises(ParameterError):
            scores.score(PredictiveLaw.gaussian(0.0, 1.0), 0.0, rule)

    def test_resolve_attaches_window_quantile(self):
        rule = ScoringRule.parse("cls@0.10:lower")
        sample = np.arange(1.0, 101.0)
        resolved = rule.resolve(sample)
        assert resolved.resolved
        assert resolved.region.threshold == pytest.approx(np.quantile(sample, 0.10))


class TestVectorizedKernels:
    def test_gaussian_scores_match_law_path(self):
        rng = np.random.default_rng(5)
        mu = rng.standard_normal(50)
        var = 0.5 + rng.random(50)
        y = rng.standard_normal(50)
        for rule in (
            ScoringRule.ls(),
            ScoringRule.crps(),
            ScoringRule.qs(0.10),
            ScoringRule.cls_tail(0.20, "upper", Region("upper", 0.20, 0.3)),
        ):
            fast = scores.gaussian_scores(rule, mu, var, y)
            slow = np.array(
                [
                    float(scores.score(PredictiveLaw.gaussian(m, v), t, rule))
                    for m, v, t in zip(mu, var, y)
                ]
            )
            np.testing.assert_allclose(fast, slow, rtol=1e-10, atol=1e-12)

    def test_mixture_scores_match_law_path(self):
        rng = np.random.default_rng(6)
        T, K = 20, 3
        w = rng.random(K)
        w /= w.sum()
        means = rng.standard_normal((T, K))
        variances = 0.3 + rng.random((T, K))
        y = rng.standard_normal(T)
        for rule in (ScoringRule.ls(), ScoringRule.crps(), ScoringRule.qs(0.05)):
            fast = scores.mixture_scores(rule, w, means, variances, y)
            slow = np.array(
                [
                    float(
                        scores.score(
                            PredictiveLaw(weights=w, means=means[t], variances=variances[t]),
                            y[t],
                            rule,
                        )
                    )
                    for t in range(T)
                ]
            )
            np.testing.assert_allclose(fast, slow, rtol=1e-9, atol=1e-11)
