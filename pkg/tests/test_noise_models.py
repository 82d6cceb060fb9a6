"""Noise families: exact moments, seeded sampling, and the bounded-variance bound."""

import math

import numpy as np
import pytest

from tonegap.errors import ContractError, DomainError
from tonegap.noise_models import (
    NoiseModel,
    bhatia_davis_bound,
    expectation,
    make_noise_model,
    sample,
)

BATTERY = [
    ("gamma", dict(param=2.0)),
    ("lognormal", dict(param=1.0)),
    ("scaled_bernoulli", dict(support_max=4.0)),
    ("two_point", dict()),
    ("clipped_lognormal", dict(param=1.0, support_max=20.0)),
]


def scaled(kw, mean):
    return {k: (v * mean if k == "support_max" else v) for k, v in kw.items()}


class TestConstruction:
    def test_unknown_family(self):
        with pytest.raises(ContractError, match="two_point"):
            make_noise_model("uniform", 1.0)

    def test_two_point_is_zero_or_double(self):
        m = make_noise_model("two_point", 1.5)
        assert m.variance == pytest.approx(1.5**2)
        assert m.support_max == pytest.approx(3.0)
        draws = sample(m, 5, 1000)
        assert set(np.unique(draws)) == {0.0, 3.0}

    def test_scaled_bernoulli_attains_the_variance_bound(self):
        m = make_noise_model("scaled_bernoulli", 1.0, support_max=4.0)
        assert m.variance == pytest.approx(bhatia_davis_bound(1.0, 4.0), abs=0)
        assert m.variance == pytest.approx(3.0)

    def test_gamma_variance_from_shape(self):
        m = make_noise_model("gamma", 2.0, param=4.0)
        assert m.variance == pytest.approx(1.0)

    def test_clipped_lognormal_mean_calibrated_exactly(self):
        for mean in (0.1, 1.0, 10.0):
            m = make_noise_model("clipped_lognormal", mean, param=1.0,
                                 support_max=20.0 * mean)
            assert expectation(m, lambda x: x) == pytest.approx(mean, rel=1e-11)

    def test_json_round_trip(self):
        for family, kw in BATTERY:
            m = make_noise_model(family, 2.0, **scaled(kw, 2.0))
            again = NoiseModel.from_json_dict(m.to_json_dict())
            assert again == m


class TestSampling:
    @pytest.mark.parametrize("family,kw", BATTERY)
    @pytest.mark.parametrize("mean", [0.1, 1.0, 10.0])
    def test_sample_moments_match_declared(self, family, kw, mean):
        """Sample mean and variance within four standard errors of exact."""
        m = make_noise_model(family, mean, **scaled(kw, mean))
        draws = sample(m, 42, 1_000_000)
        n = draws.shape[0]
        se_mean = draws.std(ddof=1) / math.sqrt(n)
        assert abs(draws.mean() - m.mean) <= 4 * se_mean
        centered = (draws - m.mean) ** 2
        # The O(1/n) term covers families whose fourth cumulant vanishes
        # (the symmetric two-point law), where the leading SE is zero.
        se_var = centered.std(ddof=1) / math.sqrt(n) + 10.0 * m.variance / n
        assert abs(draws.var(ddof=1) - m.variance) <= 4 * se_var

    @pytest.mark.parametrize("family,kw", BATTERY)
    def test_support(self, family, kw):
        m = make_noise_model(family, 1.0, **scaled(kw, 1.0))
        draws = sample(m, 11, 200_000)
        assert np.all(draws >= 0.0)
        if m.support_max is not None:
            assert np.all(draws <= m.support_max)

    def test_deterministic_for_fixed_seed(self):
        m = make_noise_model("gamma", 1.0, param=2.0)
        a = sample(m, 123, 1000)
        b = sample(m, 123, 1000)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, sample(m, 124, 1000))

    def test_frozen_vectors(self):
        """Pinned draws document the counter-based generator contract."""
        cases = {
            ("gamma", (("param", 2.0),)): [
                0.6862814111123149, 1.8857887317960347,
                1.234869401339269, 0.3558625414645323,
            ],
            ("lognormal", (("param", 1.0),)): [
                0.5777365108661859, 0.32673636757709823,
                1.9392396828050051, 0.43369092804625,
            ],
            ("clipped_lognormal", (("param", 1.0), ("support_max", 20.0))): [
                0.47657152832661304, 0.24033191951554764,
                2.0407996912818143, 0.33769833977604846,
            ],
        }
        for (family, kw), expected in cases.items():
            m = make_noise_model(family, 1.0, **dict(kw))
            np.testing.assert_allclose(sample(m, 123, 4), expected, rtol=0, atol=0)

    def test_sample_count_validation(self):
        m = make_noise_model("two_point", 1.0)
        with pytest.raises(ContractError):
            sample(m, 0, 0)


class TestBoundedVarianceBound:
    def test_peak_at_half_support(self):
        assert bhatia_davis_bound(2.0, 4.0) == 4.0  # M^2 / 4 exactly

    def test_roots_at_edges(self):
        assert bhatia_davis_bound(0.0, 4.0) == 0.0
        assert bhatia_davis_bound(4.0, 4.0) == 0.0

    def test_example_point(self):
        assert bhatia_davis_bound(1.0, 4.0) == 3.0

    def test_domain(self):
        with pytest.raises(DomainError):
            bhatia_davis_bound(5.0, 4.0)
        with pytest.raises(DomainError):
            bhatia_davis_bound(-0.1, 4.0)

    def test_parabola_shape(self):
        m_max = 4.0
        ys = np.linspace(0.0, m_max, 101)
        vals = np.array([bhatia_davis_bound(float(y), m_max) for y in ys])
        assert vals[0] == 0.0 and vals[-1] == 0.0
        assert np.argmax(vals) == 50
        assert vals.max() == pytest.approx(m_max**2 / 4.0)

    @pytest.mark.parametrize("family,kw", BATTERY)
    def test_all_bounded_models_satisfy_the_bound(self, family, kw):
        m = make_noise_model(family, 1.0, **scaled(kw, 1.0))
        if m.support_max is None:
            return
        bound = bhatia_davis_bound(m.mean, m.support_max)
        assert m.variance <= bound * (1.0 + 1e-12)
        if family == "scaled_bernoulli":
            assert m.variance == pytest.approx(bound, abs=0)


class TestExactExpectations:
    @pytest.mark.parametrize("family,kw", BATTERY)
    def test_quadrature_reproduces_analytic_moments(self, family, kw):
        m = make_noise_model(family, 1.0, **scaled(kw, 1.0))
        e1 = expectation(m, lambda x: x)
        e2 = expectation(m, lambda x: x * x)
        assert e1 == pytest.approx(m.mean, rel=1e-10)
        assert e2 - e1 * e1 == pytest.approx(m.variance, rel=1e-9)

    def test_transformed_expectation_matches_samples(self):
        from tonegap.tonemap import make_tonemap

        tm = make_tonemap("reinhard_gamma")
        m = make_noise_model("lognormal", 1.0, param=1.0)
        exact = expectation(m, lambda x: float(tm.value(x)))
        draws = tm.value(sample(m, 3, 2_000_000))
        se = draws.std(ddof=1) / math.sqrt(draws.shape[0])
        assert abs(float(draws.mean()) - exact) <= 4 * se
