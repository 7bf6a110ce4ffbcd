import math

import numpy as np
import pytest
from scipy import integrate, special

from svtv.distributions import (BggParams, NoiseModel, bgg_pdf, bgg_sample, gamma_function, gdp_radius,
                                gg_cdf, gg_pdf, gg_sample, gg_scale_from_std, gg_std_from_scale,
                                hgg_pdf, incomplete_gamma_lower, incomplete_gamma_upper, log_gamma,
                                parse_shape)
from svtv.errors import ConfigError


class TestGammaFamily:
    def test_known_values(self):
        assert gamma_function(1.0) == pytest.approx(1.0, abs=1e-15)
        assert gamma_function(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
        assert log_gamma(10.0) == pytest.approx(math.log(362880.0), rel=1e-14)

    @pytest.mark.parametrize("y", [0.0, 0.1, 1.0, 7.5])
    def test_lower_shape_one(self, y):
        assert incomplete_gamma_lower(1.0, y) == pytest.approx(1.0 - math.exp(-y), abs=1e-15)

    def test_lower_against_quadrature(self):
        # substitute t = v^2 to remove the endpoint singularity
        ref, _ = integrate.quad(lambda v: 2.0 * math.exp(-v * v), 0.0, math.sqrt(2.0), epsabs=1e-15)
        assert incomplete_gamma_lower(0.5, 2.0) == pytest.approx(ref, rel=1e-12)

    def test_lower_plus_upper(self):
        for x, y in [(0.3, 0.2), (2.5, 4.0), (7.0, 1.0)]:
            total = incomplete_gamma_lower(x, y) + incomplete_gamma_upper(x, y)
            assert total == pytest.approx(gamma_function(x), rel=1e-13)

    def test_domain(self):
        with pytest.raises(ValueError):
            log_gamma(0.0)
        with pytest.raises(ValueError):
            incomplete_gamma_lower(1.0, -1.0)


class TestGG:
    def test_laplace_peak(self):
        assert gg_pdf(0.3, 0.3, 1.7, 1.0) == pytest.approx(1.7 / 2)

    def test_gaussian_origin(self):
        assert gg_pdf(0.0, 0.0, 1.0, 2.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)

    @pytest.mark.parametrize("gamma,s", [(1.0, 1.0), (2.0, 0.7), (0.5, 2.0), (3.0, 5.0)])
    def test_pdf_integrates_to_one(self, gamma, s):
        x = np.linspace(-80 / gamma, 80 / gamma, 800001)
        assert np.trapezoid(gg_pdf(x, 0.0, gamma, s), x) == pytest.approx(1.0, abs=1e-6)

    def test_uniform_limit(self):
        assert gg_pdf(0.0, 0.0, 4.0, math.inf) == pytest.approx(2.0)
        assert gg_pdf(0.26, 0.0, 4.0, math.inf) == 0.0

    def test_cdf(self):
        assert gg_cdf(1.2, 1.2, 3.0, 0.8) == pytest.approx(0.5)
        assert gg_cdf(1e6, 0.0, 1.0, 1.5) == pytest.approx(1.0, abs=1e-10)
        x = np.linspace(-3, 3, 41)
        sigma = gg_std_from_scale(1.3, 2.0)
        ref = 0.5 * (1 + special.erf(x / (sigma * math.sqrt(2))))
        np.testing.assert_allclose(gg_cdf(x, 0.0, 1.3, 2.0), ref, atol=1e-8)

    def test_half_density(self):
        assert hgg_pdf(-0.1, 1.0, 1.0) == 0.0
        assert hgg_pdf(0.0, 2.0, 1.0) == pytest.approx(2.0)

    def test_std_scale(self):
        assert gg_std_from_scale(1.0, 2.0) == pytest.approx(math.sqrt(0.5), rel=1e-14)
        assert gg_std_from_scale(1.0, 1.0) == pytest.approx(math.sqrt(2.0), rel=1e-14)
        sigma = gg_std_from_scale(3.7, 0.8)
        assert gg_scale_from_std(sigma, 0.8) == pytest.approx(3.7, abs=1e-12)
        assert gg_std_from_scale(2.0, math.inf) == pytest.approx(1 / (2 * math.sqrt(3)))

    def test_sample_std(self):
        x = gg_sample(0.0, 1.0, 2.0, 100_000, seed=11)
        assert np.std(x) == pytest.approx(gg_std_from_scale(1.0, 2.0), rel=0.02)

    @pytest.mark.parametrize("q", [1.0, 2.0, 4.0])
    def test_power_sum_mean(self, q):
        omega, m = 1.5, 1000
        x = gg_sample(0.0, omega, q, (200, m), seed=3)
        y = np.sum(np.abs(x) ** q, axis=1)
        assert y.mean() == pytest.approx(m / (q * omega**q), rel=0.02)

    def test_sample_is_reproducible(self):
        np.testing.assert_array_equal(gg_sample(0, 1, 1.3, 50, seed=9), gg_sample(0, 1, 1.3, 50, seed=9))
        assert not np.array_equal(gg_sample(0, 1, 1.3, 50, seed=9), gg_sample(0, 1, 1.3, 50, seed=10))

    def test_uniform_sample_support(self):
        x = gg_sample(0.0, 4.0, math.inf, 10_000, seed=0)
        assert np.all(np.abs(x) <= 0.25)


class TestBGG:
    def test_standard_normal(self):
        # p = 2, alpha = 1/sqrt(2) gives exp(-|y|^2 / 2)
        params = BggParams(alpha=1 / math.sqrt(2), p=2.0)
        assert bgg_pdf(np.zeros(2), params) == pytest.approx(1 / (2 * math.pi), rel=1e-14)

    def test_rotation_invariant_when_isotropic(self):
        y = np.array([0.3, -1.1])
        vals = [bgg_pdf(y, BggParams(1.3, 1.4, th, 1.0)) for th in np.linspace(-1.5, 1.5, 7)]
        np.testing.assert_allclose(vals, vals[0], rtol=1e-14)

    def test_integrates_to_one(self):
        params = BggParams(2.0, 1.0, math.pi / 6, 0.4)
        axis = np.linspace(-20, 20, 2001)
        Y = np.stack(np.meshgrid(axis, axis, indexing="ij"))
        val = np.trapezoid(np.trapezoid(bgg_pdf(Y, params), axis, axis=1), axis)
        assert val == pytest.approx(1.0, abs=1e-3)

    def test_sample_covariance(self):
        # p = 2: covariance is R diag(1, 1/a^2) R^T / (2 alpha^2)
        params = BggParams(1.0, 2.0, math.pi / 6, 0.4)
        y = bgg_sample(params, 200_000, seed=5)
        c, s = math.cos(params.theta), math.sin(params.theta)
        R = np.array([[c, -s], [s, c]])
        expect = R @ np.diag([1.0, 1 / params.a**2]) @ R.T / 2.0
        np.testing.assert_allclose(np.cov(y.T), expect, rtol=0.03, atol=0.01)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            BggParams(1.0, 1.0, math.pi / 2, 0.5)
        with pytest.raises(ValueError):
            BggParams(1.0, 1.0, 0.0, 1.5)


class TestDiscrepancy:
    def test_radius_values(self):
        assert gdp_radius(100, 2.0, 1.0) == pytest.approx(math.sqrt(50), rel=1e-14)
        assert gdp_radius(7, math.inf, 4.0) == pytest.approx(0.25)
        assert gdp_radius(10, 1.0, 2.0) == pytest.approx(5.0)

    def test_noise_model(self):
        nm = NoiseModel(2.0, 0.1)
        assert nm.omega == pytest.approx(1 / (0.1 * math.sqrt(2)))
        assert nm.radius(100) == pytest.approx(1.0, rel=1e-14)
        assert NoiseModel("inf", 0.1).q == math.inf
        with pytest.raises(ConfigError):
            NoiseModel(2.0, 0.0)
        with pytest.raises(ConfigError):
            NoiseModel(0.5, 0.1)

    def test_parse_shape(self):
        assert parse_shape("Uniform") == math.inf
        assert parse_shape("1.5") == 1.5
        with pytest.raises(ConfigError):
            parse_shape(-2)
