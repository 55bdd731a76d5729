"""Model families and predictive laws: recursions, mixtures, pooling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from scorecast import models
from scorecast.errors import InsufficientHistoryError, ParameterError, ShapeError


def law_density(law, y):
    w = np.asarray(law.weights)
    return float(np.sum(w * stats.norm.pdf(y, law.means, np.sqrt(law.variances))))


class TestOneStepPredictive:
    def test_iid_normal_passthrough(self):
        law = models.one_step_predictive(
            models.get_family("iid_normal"), [0.0, 1.0], np.array([5.0, -3.0])
        )
        assert law.mean() == pytest.approx(0.0)
        assert law.variance() == pytest.approx(1.0)

    def test_arch_direct_substitution(self):
        # sigma^2 = 1 + 0.2 * 2^2 = 1.8
        law = models.one_step_predictive(
            models.get_family("arch1"), [0.0, 1.0, 0.2], np.array([0.5, 2.0])
        )
        assert law.variance() == pytest.approx(1.8)

    def test_arch_fixed_mean_pins_zero(self):
        law = models.one_step_predictive(
            models.get_family("arch1_fixed_mean"), [1.0, 0.2], np.array([-3.0])
        )
        assert law.mean() == 0.0
        assert law.variance() == pytest.approx(1.0 + 0.2 * 9.0)

    def test_empty_history_rejected(self):
        with pytest.raises(InsufficientHistoryError):
            models.one_step_predictive(
                models.get_family("iid_normal"), [0.0, 1.0], np.array([])
            )

    def test_out_of_domain_theta_rejected(self):
        with pytest.raises(ParameterError):
            models.one_step_predictive(
                models.get_family("arch1"), [0.0, 1.0, 1.5], np.array([1.0, 2.0])
            )


class TestRecursions:
    def test_ar1_moment_alignment(self):
        # entry i of the moment arrays predicts y[i+1]
        theta = np.array([0.3, 0.6, 1.2])
        y = np.random.default_rng(0).standard_normal(50)
        mu, var = models.get_family("ar1_normal").predictive_moments(theta, y)
        assert mu.shape == var.shape == y.shape
        np.testing.assert_allclose(mu, 0.3 + 0.6 * y)
        np.testing.assert_allclose(var, 1.2)

    def test_garch_matches_direct_recursion(self):
        theta = np.array([0.1, 0.2, 0.15, 0.7])
        y = np.random.default_rng(1).standard_normal(200) * 2.0
        mu, var = models.get_family("garch11").predictive_moments(theta, y)
        mean, omega, alpha, beta = theta
        v = omega / (1.0 - alpha - beta)
        for t in range(y.size):
            v = omega + alpha * (y[t] - mean) ** 2 + beta * v
            assert var[t] == pytest.approx(v, rel=1e-12)
            assert mu[t] == pytest.approx(mean)

    def test_garch_variance_floor(self):
        theta = np.array([0.0, 0.5, 0.3, 0.6])
        y = np.random.default_rng(2).standard_normal(500) * 3.0
        _, var = models.get_family("garch11").predictive_moments(theta, y)
        assert np.all(var >= 0.5)

    def test_ma1_matches_direct_recursion(self):
        theta = np.array([0.2, 0.5, 1.5])
        y = np.random.default_rng(3).standard_normal(100)
        mu, var = models.get_family("ma1_normal").predictive_moments(theta, y)
        intercept, ma, _ = theta
        eta = 0.0
        for t in range(y.size):
            eta = y[t] - intercept - ma * eta
            assert mu[t] == pytest.approx(intercept + ma * eta, rel=1e-10, abs=1e-12)
        np.testing.assert_allclose(var, 1.5)

    @settings(max_examples=30, deadline=None)
    @given(
        omega=st.floats(0.01, 1.0),
        alpha=st.floats(0.0, 0.5),
        beta=st.floats(0.0, 0.45),
        seed=st.integers(0, 1000),
    )
    def test_garch_variance_never_below_omega(self, omega, alpha, beta, seed):
        theta = np.array([0.0, omega, alpha, beta])
        y = np.random.default_rng(seed).standard_normal(100)
        _, var = models.get_family("garch11").predictive_moments(theta, y)
        assert np.all(var >= omega * (1.0 - 1e-12))


class TestPredictiveLaw:
    def test_density_integrates_to_one(self):
        law = models.PredictiveLaw(
            weights=np.array([0.3, 0.7]),
            means=np.array([-1.0, 2.0]),
            variances=np.array([0.5, 3.0]),
        )
        total, _ = integrate.quad(lambda y: law.pdf(y), -40, 40)
        assert abs(total - 1.0) < 1e-8

    def test_quantile_inverts_cdf(self):
        law = models.PredictiveLaw(
            weights=np.array([0.6, 0.4]),
            means=np.array([0.0, 3.0]),
            variances=np.array([1.0, 0.25]),
        )
        for p in (0.01, 0.1, 0.5, 0.9, 0.99):
            assert law.cdf(law.quantile(p)) == pytest.approx(p, abs=1e-10)

    def test_single_component_matches_norm(self):
        law = models.PredictiveLaw.gaussian(1.5, 4.0)
        assert law.logpdf(0.0) == pytest.approx(stats.norm.logpdf(0.0, 1.5, 2.0))
        assert law.quantile(0.05) == pytest.approx(stats.norm.ppf(0.05, 1.5, 2.0))

    def test_weights_must_be_normalizable(self):
        with pytest.raises(ParameterError):
            models.PredictiveLaw(
                weights=np.array([0.0, 0.0]),
                means=np.array([0.0, 1.0]),
                variances=np.array([1.0, 1.0]),
            )


class TestMixtureQuantile:
    def test_per_row_weights(self):
        means = np.array([[0.0, 2.0], [1.0, -1.0]])
        variances = np.array([[1.0, 4.0], [0.5, 2.0]])
        weights = np.array([[0.3, 0.7], [0.9, 0.1]])
        p = np.array([0.25, 0.8])
        q = models._mixture_quantile(p, weights, means, variances)
        for r in range(2):
            cdf = float(
                np.sum(
                    weights[r] * stats.norm.cdf(q[r], means[r], np.sqrt(variances[r]))
                )
            )
            assert cdf == pytest.approx(p[r], abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(
        p=st.floats(0.005, 0.995),
        m1=st.floats(-3, 3),
        m2=st.floats(-3, 3),
        s1=st.floats(0.1, 4.0),
        s2=st.floats(0.1, 4.0),
        w=st.floats(0.01, 0.99),
    )
    def test_quantile_is_cdf_inverse(self, p, m1, m2, s1, s2, w):
        law = models.PredictiveLaw(
            weights=np.array([w, 1 - w]),
            means=np.array([m1, m2]),
            variances=np.array([s1, s2]),
        )
        assert law.cdf(law.quantile(p)) == pytest.approx(p, abs=1e-8)


class TestPoolPredictive:
    def test_unit_weight_returns_component(self):
        a = models.PredictiveLaw.gaussian(0.0, 1.0)
        b = models.PredictiveLaw.gaussian(5.0, 2.0)
        pooled = models.pool_predictive([a, b], [1.0, 0.0])
        for y in (-1.0, 0.0, 2.5):
            assert pooled.logpdf(y) == pytest.approx(a.logpdf(y), abs=1e-12)

    def test_identical_components_unchanged(self):
        a = models.PredictiveLaw.gaussian(1.0, 2.0)
        pooled = models.pool_predictive([a, a, a], [0.2, 0.5, 0.3])
        for y in (-2.0, 1.0):
            assert pooled.logpdf(y) == pytest.approx(a.logpdf(y), abs=1e-12)

    def test_half_half_density_value(self):
        # 0.5 phi(0) + 0.5 phi(-1) = 0.320456...
        pooled = models.pool_predictive(
            [models.PredictiveLaw.gaussian(0.0, 1.0), models.PredictiveLaw.gaussian(1.0, 1.0)],
            [0.5, 0.5],
        )
        assert law_density(pooled, 0.0) == pytest.approx(0.3204565, abs=1e-6)
        assert law_density(pooled, 0.0) == pytest.approx(0.3203, abs=2e-4)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            models.pool_predictive([models.PredictiveLaw.gaussian(0.0, 1.0)], [0.5, 0.5])

    @settings(max_examples=30, deadline=None)
    @given(w=st.floats(0.0, 1.0), y=st.floats(-5, 5))
    def test_density_affine_in_weights(self, w, y):
        a = models.PredictiveLaw.gaussian(-0.5, 0.8)
        b = models.PredictiveLaw(
            weights=np.array([0.4, 0.6]),
            means=np.array([1.0, 2.0]),
            variances=np.array([1.0, 0.3]),
        )
        pooled = models.pool_predictive([a, b], [w, 1.0 - w])
        expected = w * law_density(a, y) + (1.0 - w) * law_density(b, y)
        assert law_density(pooled, y) == pytest.approx(expected, abs=1e-12)


class TestFamilyDomains:
    @pytest.mark.parametrize(
        "name,theta",
        [
            ("iid_normal", [0.0, -1.0]),
            ("arch1", [0.0, 1.0, -0.1]),
            ("arch1_fixed_mean", [0.0, 0.2]),
            ("garch11", [0.0, 1.0, 0.5, 0.5]),
            ("ar1_normal", [0.0, 1.0, 1.0]),
            ("ma1_normal", [0.0, -1.0, 1.0]),
        ],
    )
    def test_invalid_theta_rejected(self, name, theta):
        with pytest.raises(ParameterError):
            models.get_family(name).validate(theta)

    def test_clip_to_domain_lands_inside(self):
        fam = models.get_family("garch11")
        clipped = fam.validate(fam.clip_to_domain(np.array([0.0, -1.0, 0.6, 0.7])))
        assert clipped[1] > 0 and clipped[2] + clipped[3] < 1

    @pytest.mark.parametrize("name", sorted(models.FAMILIES))
    @pytest.mark.parametrize("extreme", [-1000.0, -50.0, 50.0, 1000.0])
    def test_saturated_transforms_stay_in_domain(self, name, extreme):
        # expit/tanh round to an endpoint and exp underflows for large |u|;
        # the mapped parameters must still be usable as a warm start.
        fam = models.get_family(name)
        u = np.full(fam.n_params, extreme)
        fam.validate(fam.from_unconstrained(u))

    def test_unknown_family(self):
        with pytest.raises(ParameterError):
            models.get_family("arch9")
