"""Process simulators: determinism, moment identities, domain guards."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scorecast import dgp
from scorecast.errors import ParameterError, ShapeError


class TestSimulateDeterminism:
    def test_same_triple_bit_identical(self):
        spec = dgp.GaussianArch1(1.0, 0.2)
        a = dgp.simulate(spec, 500, 42).values
        b = dgp.simulate(spec, 500, 42).values
        assert np.array_equal(a, b)

    def test_seed_changes_path(self):
        spec = dgp.GarchT(1.0, 0.2, 0.7, 8.0)
        a = dgp.simulate(spec, 200, 1).values
        b = dgp.simulate(spec, 200, 2).values
        assert not np.array_equal(a, b)

    def test_exact_length(self):
        y = dgp.simulate(dgp.Arma11(0.0, 0.5, 0.3), 123, 0)
        assert len(y) == 123
        assert np.all(np.isfinite(y.values))

    @settings(max_examples=25, deadline=None)
    @given(
        c=st.floats(0.1, 2.0),
        a=st.floats(0.0, 0.9),
        T=st.integers(2, 200),
        seed=st.integers(0, 2**32),
    )
    def test_arch_paths_always_finite(self, c, a, T, seed):
        y = dgp.simulate(dgp.GaussianArch1(c, a), T, seed)
        assert len(y) == T
        assert np.all(np.isfinite(y.values))


class TestMomentIdentities:
    def test_arch1_unconditional_variance(self):
        # var = c / (1 - a) = 1.25
        y = dgp.simulate(dgp.GaussianArch1(1.0, 0.2), 1_000_000, 0).values
        assert y.var() == pytest.approx(1.25, rel=0.02)

    def test_garch_t_unconditional_variance(self):
        # var = c / (1 - a - b) = 10; wide tolerance, t_3 tails are heavy
        spec = dgp.GarchT(1.0, 0.2, 0.7, 3.0)
        assert spec.unconditional_variance == pytest.approx(10.0)
        y = dgp.simulate(spec, 1_000_000, 0).values
        assert y.var() == pytest.approx(10.0, rel=0.10)

    def test_standardized_t_unit_variance(self):
        rng = np.random.default_rng(7)
        x = dgp.StudentT(10.0).sample(rng, 1_000_000)
        assert x.var() == pytest.approx(1.0, rel=0.02)

    def test_arma_stationary_mean(self):
        spec = dgp.Arma11(1.0, 0.5, 0.3)
        assert spec.stationary_mean == pytest.approx(2.0)
        y = dgp.simulate(spec, 500_000, 11).values
        assert y.mean() == pytest.approx(2.0, abs=0.02)

    def test_mixture_innovation_skewness(self):
        mix = dgp.NormalMixture(0.8, 0.3, 0.54, -1.2, 1.43)
        rng = np.random.default_rng(3)
        e = mix.sample(rng, 1_000_000)
        centered = e - e.mean()
        skew = np.mean(centered**3) / np.mean(centered**2) ** 1.5
        assert skew == pytest.approx(-1.58, abs=0.03)


class TestMixtureMoments:
    def test_degenerate_single_gaussian(self):
        mean, var, skew = dgp.mixture_moments(dgp.NormalMixture(1.0, 0.0, 1.0, 5.0, 2.0))
        assert (mean, var, skew) == pytest.approx((0.0, 1.0, 0.0))

    def test_reference_mixture_standardized(self):
        mix = dgp.NormalMixture(0.8, 0.3, 0.54, -1.2, 1.43)
        mean, var, skew = dgp.mixture_moments(mix)
        # parameters are quoted rounded, so mean/var miss 0/1 by < 1e-2
        assert abs(mean) < 1e-2
        assert abs(var - 1.0) < 1e-2
        assert skew == pytest.approx(-1.581, abs=1e-3)

    def test_symmetric_mixture_zero_skew(self):
        mix = dgp.NormalMixture(0.5, 0.7, 1.3, -0.7, 1.3)
        mean, var, skew = dgp.mixture_moments(mix)
        assert mean == pytest.approx(0.0, abs=1e-15)
        assert skew == pytest.approx(0.0, abs=1e-12)

    def test_monte_carlo_agreement(self):
        mix = dgp.NormalMixture(0.3, 1.0, 0.5, -0.4, 2.0)
        mean, var, _ = dgp.mixture_moments(mix)
        rng = np.random.default_rng(0)
        x = mix.sample(rng, 500_000)
        assert x.mean() == pytest.approx(mean, abs=0.01)
        assert x.var() == pytest.approx(var, rel=0.01)

    def test_rejects_non_mixture(self):
        with pytest.raises(TypeError):
            dgp.mixture_moments(dgp.StdNormal())


class TestDomainGuards:
    def test_arch_stationarity(self):
        with pytest.raises(ParameterError):
            dgp.GaussianArch1(1.0, 1.0)
        with pytest.raises(ParameterError):
            dgp.GaussianArch1(0.0, 0.2)

    def test_garch_stationarity_never_clamped(self):
        with pytest.raises(ParameterError):
            dgp.GarchT(1.0, 0.3, 0.7, 8.0)
        with pytest.raises(ParameterError):
            dgp.GarchT(1.0, 0.2, 0.7, 2.0)

    def test_arma_root(self):
        with pytest.raises(ParameterError):
            dgp.Arma11(0.0, 1.0, 0.3)

    def test_standardized_t_needs_nu_above_two(self):
        with pytest.raises(ParameterError):
            dgp.StudentT(2.0)
        dgp.StudentT(2.0, standardized=False)  # fine unstandardized

    def test_mixture_guards(self):
        with pytest.raises(ParameterError):
            dgp.NormalMixture(1.2, 0.0, 1.0, 0.0, 1.0)
        with pytest.raises(ParameterError):
            dgp.NormalMixture(0.5, 0.0, -1.0, 0.0, 1.0)

    def test_simulate_t_too_small(self):
        with pytest.raises(ParameterError):
            dgp.simulate(dgp.GaussianArch1(1.0, 0.2), 1, 0)


class TestReturnSeries:
    def test_rejects_non_finite(self):
        with pytest.raises(ParameterError):
            dgp.ReturnSeries(np.array([1.0, np.nan]))

    def test_rejects_short(self):
        with pytest.raises(ShapeError):
            dgp.ReturnSeries(np.array([1.0]))

    def test_date_alignment(self):
        with pytest.raises(ShapeError):
            dgp.ReturnSeries(np.array([1.0, 2.0]), dates=("2020-01-01",))
        series = dgp.ReturnSeries(np.array([1.0, 2.0]), dates=("2020-01-01", "2020-01-02"))
        assert len(series) == 2
