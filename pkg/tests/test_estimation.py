import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from svtv.distributions import BggParams, bgg_sample, gg_sample
from svtv.estimation import (EstimationConfig, estimate_maps, estimate_wdtvp, estimate_wtv_alpha, estimate_wtvp,
                             fit_wdtvp_windows, fit_wtvp_windows, local_power_sums, wdtvp_objective,
                             wtvp_alpha, wtvp_objective)
from svtv.fileio import read_map_blob, read_pgm
from svtv.imagecore import gradient
from svtv.regularizers import RegKind

DATA = Path(__file__).parent / "data"


def brute_window_sums(mags, r, p):
    n1, n2 = mags.shape
    out = np.zeros_like(mags)
    for i in range(n1):
        for j in range(n2):
            acc = 0.0
            for s in range(-r, r + 1):
                for t in range(-r, r + 1):
                    ii = min(max(i + s, 0), n1 - 1)
                    jj = min(max(j + t, 0), n2 - 1)
                    acc += mags[ii, jj] ** p
            out[i, j] = acc
    return out


class TestWindowSums:
    def test_constant(self):
        for r in (1, 2, 3):
            out = local_power_sums(np.full((7, 9), 0.6), r, 1.5)
            np.testing.assert_allclose(out, (2 * r + 1) ** 2 * 0.6**1.5, rtol=1e-13)

    @pytest.mark.parametrize("r,p", [(1, 1.0), (2, 0.7), (9, 1.8)])
    def test_brute_force(self, r, p):
        rng = np.random.default_rng(r)
        mags = rng.random((16, 16))
        assert np.max(np.abs(local_power_sums(mags, r, p) - brute_window_sums(mags, r, p))) <= 1e-12

    def test_accepts_gradient_field(self):
        rng = np.random.default_rng(7)
        g = rng.standard_normal((2, 5, 5))
        np.testing.assert_allclose(local_power_sums(g, 1), local_power_sums(np.hypot(g[0], g[1]), 1))


class TestWtv:
    def test_reciprocal_mean(self):
        cfg = EstimationConfig(eps_reg=0.0)
        np.testing.assert_allclose(estimate_wtv_alpha(np.full((5, 5), 0.5), cfg), 2.0, rtol=1e-14)

    def test_zero_window(self):
        cfg = EstimationConfig(eps_reg=1e-3)
        np.testing.assert_allclose(estimate_wtv_alpha(np.zeros((4, 4)), cfg), 1000.0, rtol=1e-12)

    def test_mixed_window(self):
        # a 3x3 window of ones and threes averaging to 2
        mags = np.array([[1.0, 3.0, 1.0], [3.0, 2.0, 1.0], [3.0, 1.0, 3.0]])
        alpha = estimate_wtv_alpha(mags, EstimationConfig(eps_reg=0.0))
        assert alpha[1, 1] == pytest.approx(0.5, rel=1e-14)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(0)
        mags = rng.random((10, 10))
        cfg = EstimationConfig(eps_reg=0.0)
        np.testing.assert_allclose(estimate_wtv_alpha(4 * mags, cfg), estimate_wtv_alpha(mags, cfg) / 4, rtol=1e-13)


class TestWtvp:
    def test_alpha_at_p_one(self):
        rng = np.random.default_rng(1)
        mags = rng.random((9, 9))
        cfg = EstimationConfig()
        mean = local_power_sums(mags, cfg.radius, 1.0) / cfg.window_size + cfg.eps_reg
        np.testing.assert_allclose(wtvp_alpha(mean, 1.0), estimate_wtv_alpha(mags, cfg), rtol=1e-15)

    def test_hgg_window_is_the_mle(self):
        # |x| under hGG has the likelihood of x under GG with zero mean
        cfg = EstimationConfig(eps_reg=0.0)
        for seed in range(3):
            x = gg_sample(0.0, 2.0, 0.7, 10_000, seed=seed)
            alpha, p = fit_wtvp_windows(np.abs(x)[None, :], cfg)
            shape, _, scale = stats.gennorm.fit(x, floc=0.0)
            assert 0.63 <= p[0] <= 0.77
            assert p[0] == pytest.approx(shape, rel=1e-3)
            assert alpha[0] == pytest.approx(1.0 / scale, rel=1e-3)
            ours = stats.gennorm.logpdf(x, p[0], scale=1.0 / alpha[0]).sum()
            assert ours >= stats.gennorm.logpdf(x, shape, scale=scale).sum() - 1e-6

    def test_hgg_scale_is_unbiased_across_seeds(self):
        alphas = [fit_wtvp_windows(np.abs(gg_sample(0.0, 2.0, 0.7, 10_000, seed=s))[None, :])[0][0]
                  for s in range(20)]
        assert np.mean(alphas) == pytest.approx(2.0, rel=0.02)

    def test_equal_magnitudes_golden(self):
        cfg = EstimationConfig()
        alpha, p = fit_wtvp_windows(np.ones((1, 9)), cfg)
        grid = cfg.p_grid()
        expected_p = grid[np.argmin(wtvp_objective(1.0 + cfg.eps_reg, grid, 9))]
        assert expected_p == 2.0
        assert p[0] == 2.0
        assert alpha[0] == pytest.approx(0.7071064276334221, rel=1e-14)

    def test_certifies_against_grid(self):
        rng = np.random.default_rng(2)
        mags = rng.gamma(0.8, 0.2, (12, 12))
        cfg = EstimationConfig()
        alpha, p = estimate_wtvp(mags, cfg)
        m = cfg.window_size
        win = np.lib.stride_tricks.sliding_window_view(np.pad(mags, 1, mode="edge"), (3, 3)).reshape(12, 12, m)
        g_hat = wtvp_objective(np.mean(win ** p[..., None], axis=-1) + cfg.eps_reg, p, m)
        for pk in cfg.p_grid():
            g_k = wtvp_objective(local_power_sums(mags, 1, pk) / m + cfg.eps_reg, pk, m)
            assert np.all(g_hat <= g_k + 1e-9 * np.abs(g_k))
        assert np.all((p >= cfg.p_min) & (p <= cfg.p_max)) and np.all(alpha > 0)

    def test_scale_leaves_p(self):
        rng = np.random.default_rng(3)
        mags = rng.gamma(1.2, 0.3, (10, 10))
        cfg = EstimationConfig(eps_reg=0.0)
        _, p1 = estimate_wtvp(mags, cfg)
        _, p2 = estimate_wtvp(3.0 * mags, cfg)
        step = cfg.p_grid()[1] - cfg.p_grid()[0]
        assert np.max(np.abs(p1 - p2)) <= step


class TestWdtvp:
    def test_collinear_window(self):
        cfg = EstimationConfig()
        g1 = np.full((1, 9), 0.7)
        g2 = np.zeros((1, 9))
        alpha, p, theta, a = fit_wdtvp_windows(g1, g2, cfg)
        # the strongly penalized axis lies across the data, i.e. at +-pi/2
        res = math.pi / cfg.grid_theta
        assert abs(abs(theta[0]) - math.pi / 2) <= res
        assert a[0] == cfg.a_floor
        vals = wdtvp_objective(g1, g2, np.full(20, p[0]), np.full(20, theta[0]), np.linspace(1.0, cfg.a_floor, 20))
        assert np.all(np.diff(vals) < 0)

    def test_bgg_window(self):
        truth = BggParams(1.0, 2.0, math.pi / 6, 0.4)
        y = bgg_sample(truth, 10_000, seed=4)
        alpha, p, theta, a = fit_wdtvp_windows(y[None, :, 0], y[None, :, 1])
        # the sample cloud is stretched across theta, which the fit recovers as is
        err = (theta[0] - truth.theta + math.pi / 2) % math.pi - math.pi / 2
        assert abs(err) <= math.radians(5)
        assert abs(a[0] - truth.a) <= 0.1
        assert abs(p[0] - truth.p) <= 0.3

    def test_isotropic_theta_independent(self):
        rng = np.random.default_rng(5)
        y = rng.standard_normal((2, 1, 400))
        thetas = EstimationConfig().theta_grid()
        vals = wdtvp_objective(np.repeat(y[0], len(thetas), 0), np.repeat(y[1], len(thetas), 0),
                               np.full(len(thetas), 1.3), thetas, np.ones(len(thetas)))
        assert np.ptp(vals) <= 1e-8 * np.abs(vals).max()

    def test_rotation_equivariance(self):
        truth = BggParams(2.0, 1.5, -0.4, 0.35)
        y = bgg_sample(truth, 2000, seed=6)
        phi = 0.9
        c, s = math.cos(phi), math.sin(phi)
        yr = y @ np.array([[c, s], [-s, c]])
        cfg = EstimationConfig()
        _, p0, t0, a0 = fit_wdtvp_windows(y[None, :, 0], y[None, :, 1], cfg)
        _, p1, t1, a1 = fit_wdtvp_windows(yr[None, :, 0], yr[None, :, 1], cfg)
        shift = (t1[0] - t0[0] - phi + math.pi / 2) % math.pi - math.pi / 2
        assert abs(shift) <= math.pi / cfg.grid_theta
        assert abs(p1[0] - p0[0]) <= cfg.p_grid()[1] - cfg.p_grid()[0]
        assert abs(a1[0] - a0[0]) <= cfg.a_grid()[1] - cfg.a_grid()[0]

    def test_ranges(self):
        rng = np.random.default_rng(8)
        cfg = EstimationConfig()
        alpha, p, theta, a = estimate_wdtvp(rng.standard_normal((2, 12, 12)), cfg)
        assert np.all(alpha > 0)
        assert np.all((p >= cfg.p_min) & (p <= cfg.p_max))
        assert np.all((theta >= -math.pi / 2) & (theta < math.pi / 2))
        assert np.all((a >= cfg.a_floor) & (a <= 1))

    def test_beats_every_coarse_candidate(self):
        rng = np.random.default_rng(9)
        g = rng.standard_normal((2, 6, 9)) * rng.uniform(0.1, 1, (1, 6, 9))
        g1 = np.lib.stride_tricks.sliding_window_view(np.pad(g[0], 1, mode="edge"), (3, 3)).reshape(-1, 9)
        g2 = np.lib.stride_tricks.sliding_window_view(np.pad(g[1], 1, mode="edge"), (3, 3)).reshape(-1, 9)
        cfg = EstimationConfig(grid_p=8, grid_theta=12, grid_a=6)
        alpha, p, theta, a = fit_wdtvp_windows(g1, g2, cfg)
        best = wdtvp_objective(g1, g2, p, theta, a, cfg.eps_reg)
        n = g1.shape[0]
        for pk in cfg.p_grid():
            for tk in cfg.theta_grid():
                for ak in cfg.a_grid():
                    cand = wdtvp_objective(g1, g2, np.full(n, pk), np.full(n, tk), np.full(n, ak), cfg.eps_reg)
                    assert np.all(best <= cand + 1e-9 * np.abs(cand))


class TestDispatch:
    def test_constant_image_wtv(self):
        cfg = EstimationConfig(eps_reg=1e-4)
        maps = estimate_maps(RegKind.WTV, np.full((6, 6), 0.3), cfg)
        np.testing.assert_allclose(maps.alpha, 1e4, rtol=1e-12)

    @pytest.mark.parametrize("kind", list(RegKind))
    def test_ranges_for_random_input(self, kind):
        rng = np.random.default_rng(10)
        cfg = EstimationConfig()
        maps = estimate_maps(kind, rng.random((10, 10)), cfg)
        maps.validate()
        assert np.all((maps.p >= cfg.p_min) & (maps.p <= cfg.p_max))
        assert np.all((maps.a >= cfg.a_floor) & (maps.a <= 1))

    def test_space_invariant_maps_are_flat(self):
        rng = np.random.default_rng(11)
        maps = estimate_maps("TVp", rng.random((10, 10)))
        assert np.ptp(maps.alpha) == 0 and np.ptp(maps.p) == 0

    @pytest.mark.parametrize("kind,fields", [("WTV", ("alpha",)), ("WTVpSV", ("alpha", "p")),
                                             ("WDTVpSV", ("alpha", "p", "theta", "a"))])
    def test_golden_texture(self, kind, fields):
        u, _ = read_pgm(DATA / "texture32.pgm")
        maps = estimate_maps(kind, u)
        for name in fields:
            golden = read_map_blob(DATA / f"golden_{kind}_{name}.map")
            np.testing.assert_array_equal(getattr(maps, name), golden, err_msg=name)


def test_config_validation():
    from svtv.errors import ConfigError
    with pytest.raises(ConfigError):
        EstimationConfig(radius=0)
    with pytest.raises(ConfigError):
        EstimationConfig(p_min=2.0, p_max=1.0)
    with pytest.raises(ConfigError):
        EstimationConfig(a_floor=0.0)


def test_gradient_field_input():
    rng = np.random.default_rng(12)
    u = rng.random((8, 8))
    alpha, p = estimate_wtvp(gradient(u))
    assert alpha.shape == (8, 8) and p.shape == (8, 8)
