import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import thin_to_independent
from nnd.diagnostics import ess, ks_statistic, two_sample_ks
from nnd.distributions import (
    NndParams,
    NpParams,
    bessel_k0,
    gamma_cdf,
    nnd_log_density_unnorm,
    np_1x1_density,
    np_asymptotic_log_density,
    np_asymptotic_log_density_1x1,
    np_limit_eigenvalue_density,
    np_limit_squared_sv_density,
    np_limit_squared_sv_edge,
    sample_gamma,
    sample_haar_orthogonal,
    sample_inverse_gamma,
    sample_nnd_singular_values,
    sample_nnd_via_svd,
    sample_normal_product,
    sample_uniform_stiefel,
    singular_value_log_density_unnorm,
)
from nnd.samplers import ChainConfig


class TestMatrixLogDensity:
    def test_zero_matrix_unit_rate(self):
        p = NndParams(1.0, 2, 3)
        assert nnd_log_density_unnorm(np.zeros((2, 3)), p) == 0.0

    def test_1x1_matches_laplace_up_to_constant(self):
        # log density of Laplace(2) at 0.5 is log(2/2) - 2*0.5 = -1; the
        # unnormalized value nm log(lam) - lam|x| = log 2 - 1 sits exactly
        # log 2 above it: the omitted constant is -log(0! * Vol_0 / 1) with
        # Vol_0 = 2 (the two points of the 1x1 unit sphere)
        p = NndParams(2.0, 1, 1)
        val = nnd_log_density_unnorm(np.array([[0.5]]), p)
        assert val == pytest.approx(math.log(2.0) - 1.0)
        laplace_log = math.log(2.0 / 2.0) - 2.0 * 0.5
        assert val - laplace_log == pytest.approx(math.log(2.0))

    def test_rate_scaling_identity(self, rng):
        p1 = NndParams(1.3, 3, 2)
        p2 = NndParams(2.6, 3, 2)
        from nnd.linalg import nuclear_norm

        for _ in range(5):
            x = rng.standard_normal((3, 2))
            diff = nnd_log_density_unnorm(x, p1) - nnd_log_density_unnorm(x, p2)
            expect = -6 * math.log(2.0) + 1.3 * nuclear_norm(x)
            assert diff == pytest.approx(expect, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nnd_log_density_unnorm(np.zeros((2, 2)), NndParams(1.0, 2, 3))


class TestSingularValueLogDensity:
    def test_1x1_exponential(self):
        p = NndParams(1.5, 1, 1)
        assert singular_value_log_density_unnorm([2.0], p) == pytest.approx(-3.0)

    def test_1x4_gamma_kernel(self):
        # one singular value, shape gap 3: -lam*s + 3 log s
        p = NndParams(1.0, 1, 4)
        val = singular_value_log_density_unnorm([2.0], p)
        assert val == pytest.approx(-2.0 + 3.0 * math.log(2.0))

    def test_repeated_values_vanish(self):
        p = NndParams(1.0, 2, 2)
        assert singular_value_log_density_unnorm([1.0, 1.0], p) == -math.inf

    def test_zero_value_with_gap_vanishes(self):
        p = NndParams(1.0, 2, 5)
        assert singular_value_log_density_unnorm([0.0, 1.0], p) == -math.inf

    def test_negative_vanishes(self):
        p = NndParams(1.0, 2, 2)
        assert singular_value_log_density_unnorm([-0.5, 1.0], p) == -math.inf

    def test_permutation_symmetric(self, rng):
        p = NndParams(0.7, 3, 6)
        s = rng.uniform(0.5, 3.0, size=3)
        a = singular_value_log_density_unnorm(s, p)
        b = singular_value_log_density_unnorm(s[::-1], p)
        assert a == pytest.approx(b, rel=1e-14)

    def test_wide_and_tall_agree(self):
        a = singular_value_log_density_unnorm([1.0, 2.0], NndParams(1.0, 2, 7))
        b = singular_value_log_density_unnorm([1.0, 2.0], NndParams(1.0, 7, 2))
        assert a == b


class TestFrames:
    def test_haar_orthonormal(self, rng):
        q = sample_haar_orthogonal(6, rng)
        assert np.linalg.norm(q.T @ q - np.eye(6)) < 1e-10

    def test_haar_1x1_sign_frequency(self, rng):
        vals = [sample_haar_orthogonal(1, rng)[0, 0] for _ in range(10000)]
        assert abs(np.mean(np.array(vals) > 0) - 0.5) < 0.02

    def test_haar_left_invariance(self, rng):
        p = sample_haar_orthogonal(3, rng)
        a = np.array([sample_haar_orthogonal(3, rng)[0, 0] for _ in range(4000)])
        b = np.array([(p @ sample_haar_orthogonal(3, rng))[0, 0] for _ in range(4000)])
        d, _ = two_sample_ks(a, b)
        assert d < 0.04

    def test_stiefel_orthonormal(self, rng):
        v = sample_uniform_stiefel(3, 8, rng)
        assert v.shape == (8, 3)
        assert np.linalg.norm(v.T @ v - np.eye(3)) < 1e-10

    def test_stiefel_requires_thin(self, rng):
        with pytest.raises(ValueError):
            sample_uniform_stiefel(5, 3, rng)

    def test_stiefel_square_is_haar_shape(self, rng):
        v = sample_uniform_stiefel(4, 4, rng)
        assert np.linalg.norm(v.T @ v - np.eye(4)) < 1e-10

    def test_stiefel_entry_symmetric(self, rng):
        vals = np.array([sample_uniform_stiefel(2, 5, rng)[0, 0] for _ in range(10000)])
        # each column is marginally uniform on the sphere; entry mean 0 with
        # variance 1/m
        assert abs(vals.mean()) < 3.0 * math.sqrt(1.0 / 5.0 / len(vals))


class TestSingularValueSampler:
    def test_1x1_exponential_ks(self):
        p = NndParams(1.0, 1, 1)
        cfg = ChainConfig(iterations=42000, burn_in=2000, seed=7)
        draws = sample_nnd_singular_values(p, cfg)[:, 0]
        vals = thin_to_independent(draws)
        d, pval = ks_statistic(vals, lambda q: 1.0 - np.exp(-np.maximum(q, 0.0)))
        assert pval > 0.01, (d, pval, vals.size)

    def test_2x7_sum_mean(self):
        p = NndParams(1.0, 2, 7)
        cfg = ChainConfig(iterations=60000, burn_in=3000, seed=11)
        sums = sample_nnd_singular_values(p, cfg).sum(axis=1)
        assert abs(sums.mean() - 14.0) / 14.0 < 0.02

    def test_2x7_sum_gamma_ks(self):
        p = NndParams(1.0, 2, 7)
        cfg = ChainConfig(iterations=80000, burn_in=3000, seed=13)
        sums = sample_nnd_singular_values(p, cfg).sum(axis=1)
        vals = thin_to_independent(sums)
        d, pval = ks_statistic(vals, lambda q: gamma_cdf(q, 14, 1.0))
        assert pval > 0.01, (d, pval, vals.size)

    def test_descending_output(self):
        p = NndParams(1.0, 3, 3)
        cfg = ChainConfig(iterations=3000, burn_in=500, seed=3)
        draws = sample_nnd_singular_values(p, cfg)
        assert np.all(np.diff(draws, axis=1) <= 0)


class TestMatrixSampler:
    def test_norms_match_gamma(self):
        cfg = ChainConfig(iterations=60000, burn_in=3000, thinning=2, seed=5)
        draws = sample_nnd_via_svd(NndParams(1.0, 2, 2), cfg)
        norms = np.linalg.svd(draws, compute_uv=False).sum(axis=1)
        vals = thin_to_independent(norms)
        d, pval = ks_statistic(vals, lambda q: gamma_cdf(q, 4, 1.0))
        assert pval > 0.01, (d, pval, vals.size)

    def test_orthogonal_invariance_of_functional(self, rng):
        cfg = ChainConfig(iterations=40000, burn_in=2000, thinning=4, seed=9)
        draws = sample_nnd_via_svd(NndParams(1.0, 2, 3), cfg)
        p = sample_haar_orthogonal(2, rng)
        q = sample_haar_orthogonal(3, rng)
        probe = rng.standard_normal((2, 3))
        half = draws.shape[0] // 2
        a = np.einsum("ij,kij->k", probe, draws[:half])
        b = np.einsum("ij,kij->k", probe, p @ draws[half:2 * half] @ q)
        d, _ = two_sample_ks(a, b)
        assert d < 0.03, d

    def test_1x1_laplace_quantiles(self):
        cfg = ChainConfig(iterations=60000, burn_in=2000, thinning=4, seed=21)
        draws = sample_nnd_via_svd(NndParams(1.0, 1, 1), cfg)[:, 0, 0]
        # Laplace(1) quartiles are -log 2, 0, +log 2
        qs = np.quantile(draws, [0.25, 0.5, 0.75])
        assert qs[0] == pytest.approx(-math.log(2.0), abs=0.05)
        assert abs(qs[1]) < 0.05
        assert qs[2] == pytest.approx(math.log(2.0), abs=0.05)

    def test_tall_orientation(self):
        cfg = ChainConfig(iterations=2000, burn_in=500, seed=2)
        draws = sample_nnd_via_svd(NndParams(1.0, 5, 2), cfg)
        assert draws.shape[1:] == (5, 2)


class TestNormalProduct:
    def test_entry_mean_zero(self, rng):
        draws = sample_normal_product(NpParams(1.0, 2), rng, size=4000)
        se = draws.std(axis=0).max() / math.sqrt(4000)
        assert np.abs(draws.mean(axis=0)).max() < 4.0 * se

    def test_entry_variance(self, rng):
        # Var of one entry of the product is n sigma^4
        draws = sample_normal_product(NpParams(1.0, 3), rng, size=30000)
        v = draws.reshape(30000, -1).var(axis=0).mean()
        assert abs(v - 3.0) / 3.0 < 0.05

    def test_1x1_bessel_chi2(self, rng):
        from nnd.validate import check_np_1x1_bessel

        res = check_np_1x1_bessel(40000, seed=4)
        assert res.passed, res.line()


class TestBesselK0:
    def test_known_values(self):
        # reference values of K0 (Abramowitz-Stegun style)
        assert bessel_k0(1.0) == pytest.approx(0.42102443824070834, rel=1e-9)
        assert bessel_k0(5.0) == pytest.approx(0.003691098334042594, rel=1e-8)

    def test_density_normalizes(self):
        val, _ = quad(lambda z: np_1x1_density(z), 1e-12, 60.0, limit=300)
        assert 2.0 * val == pytest.approx(1.0, abs=1e-6)


class TestNpAsymptotic:
    def test_tau_slope_is_minus_2p5(self):
        x = np.diag([2.0, 1.0])
        h = 1e-5

        def f(log_tau):
            tau = math.exp(log_tau)
            from nnd.linalg import nuclear_norm

            return np_asymptotic_log_density(x, tau) + nuclear_norm(x) / tau

        slope = (f(h) - f(-h)) / (2.0 * h)
        assert slope == pytest.approx(-2.5, abs=1e-6)

    def test_hand_evaluated_prefactor(self):
        # n=2, d=(2,1), tau=1: independent evaluation of the closed form
        x = np.diag([2.0, 1.0])
        val = np_asymptotic_log_density(x, 1.0)
        pair = math.sqrt(2.0) + 1.0 / math.sqrt(2.0)
        vol = (1.0 + (1.0 + 2 ** -0.5) * (1.0 + 2 ** 0.5)) ** 2 - 4.0 * 3.0 * 1.5
        prod = 4.0 * 3.0 * 3.0 * 2.0
        expect = (math.log(2.0) - 2.5 * math.log(2.0 * math.pi)
                  - 0.5 * math.log(pair) + 0.5 * math.log(vol / prod) - 3.0)
        assert val == pytest.approx(expect, rel=1e-12)

    def test_continuous_at_near_equal_values(self):
        a = np_asymptotic_log_density(np.diag([1.0, 1.0 + 1e-8]), 1.0)
        b = np_asymptotic_log_density(np.diag([1.0, 1.0 + 1e-6]), 1.0)
        assert np.isfinite(a) and np.isfinite(b)
        assert abs(a - b) < 1e-2

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            np_asymptotic_log_density(np.array([[1.0]]), 1.0)  # n = 1
        with pytest.raises(ValueError):
            np_asymptotic_log_density(np.ones((2, 3)), 1.0)  # non-square
        with pytest.raises(ValueError):
            np_asymptotic_log_density(np.eye(2), 1.0)  # repeated values
        with pytest.raises(ValueError):
            np_asymptotic_log_density(np.diag([1.0, 0.0]), 1.0)  # zero value

    def test_1d_analogue_tracks_bessel(self):
        # the scalar Laplace expansion against the quadrature Bessel density;
        # the next-order Bessel correction is 1/(8z), so at z=10 the gap is
        # still ~1.2%; from z ~ 12.5 on it is inside 1%
        for z in (12.5, 15.0, 20.0, 30.0):
            approx = math.exp(np_asymptotic_log_density_1x1(z))
            exact = bessel_k0(z) / math.pi
            assert abs(approx - exact) / exact < 0.01
        z = 10.0
        approx = math.exp(np_asymptotic_log_density_1x1(z))
        exact = bessel_k0(z) / math.pi
        assert abs(approx - exact) / exact < 0.013


class TestSpectralLimits:
    def test_eigenvalue_density_values(self):
        assert np_limit_eigenvalue_density(0.5) == pytest.approx(2.0 / math.pi)
        assert np_limit_eigenvalue_density(2.0) == 0.0
        with pytest.raises(ValueError):
            np_limit_eigenvalue_density(0.0)

    def test_eigenvalue_radial_empirical(self, rng):
        n = 100
        mods = []
        for _ in range(30):
            x = sample_normal_product(NpParams(1.0, n), rng) / n
            mods.append(np.abs(np.linalg.eigvals(x)))
        mods = np.clip(np.concatenate(mods), 0.0, 1.0)
        d, _ = ks_statistic(mods, lambda r: np.clip(r, 0.0, 1.0))
        assert d < 0.06, d

    def test_squared_sv_density_against_roots_oracle(self):
        for lam in (0.3, 1.0, 2.5, 6.0):
            roots = np.roots([lam ** 2, 0.0, -lam, 1.0])
            im = np.abs(roots.imag).max()
            assert np_limit_squared_sv_density(lam) == pytest.approx(
                im / math.pi, rel=1e-9)

    def test_support_edge(self):
        edge = np_limit_squared_sv_edge()
        assert edge == pytest.approx(6.75, abs=1e-9)
        assert np_limit_squared_sv_density(edge + 1e-9) == 0.0
        assert np_limit_squared_sv_density(edge - 1e-6) < 1e-3

    def test_density_integrates_to_one(self):
        edge = np_limit_squared_sv_edge()
        # substitute lam = u^3 to remove the lam^(-2/3) singularity at zero
        val, _ = quad(lambda u: 3.0 * u * u * np_limit_squared_sv_density(u ** 3),
                      0.0, edge ** (1.0 / 3.0), limit=200)
        assert val == pytest.approx(1.0, abs=1e-3)

    def test_matches_empirical_spectrum(self, rng):
        n = 400
        sq = np.concatenate([
            np.linalg.svd(sample_normal_product(NpParams(1.0, n), rng) / n,
                          compute_uv=False) ** 2
            for _ in range(4)])
        hist, edges = np.histogram(sq, bins=24, range=(0.2, 6.0), density=True)
        mids = (edges[:-1] + edges[1:]) / 2.0
        dens = np.array([np_limit_squared_sv_density(m) for m in mids])
        mass_in_range = np.mean((sq >= 0.2) & (sq <= 6.0))
        assert np.abs(hist * mass_in_range - dens).mean() < 0.03


class TestScalarBundle:
    def test_gamma_cdf_monotone_and_limits(self):
        xs = np.linspace(0.0, 50.0, 200)
        vals = gamma_cdf(xs, 3.0, 0.5)
        assert np.all(np.diff(vals) >= 0)
        assert vals[-1] > 0.999

    def test_gamma_shape_one_is_exponential(self, rng):
        draws = sample_gamma(1.0, 2.0, rng, size=20000)
        d, p = ks_statistic(draws, lambda q: 1.0 - np.exp(-2.0 * np.maximum(q, 0.0)))
        assert p > 0.01

    def test_inverse_gamma_mean(self, rng):
        draws = sample_inverse_gamma(3.0, 4.0, rng, size=100000)
        assert abs(draws.mean() - 2.0) / 2.0 < 0.05

    def test_parameter_validation(self, rng):
        with pytest.raises(ValueError):
            sample_gamma(-1.0, 1.0, rng)
        with pytest.raises(ValueError):
            sample_inverse_gamma(1.0, 0.0, rng)
        with pytest.raises(ValueError):
            gamma_cdf(1.0, 0.0, 1.0)


def test_monotone_coupling_in_rate():
    cfg = ChainConfig(iterations=20000, burn_in=2000, seed=17)
    mean_1 = sample_nnd_singular_values(NndParams(1.0, 2, 2), cfg).sum(axis=1).mean()
    mean_2 = sample_nnd_singular_values(NndParams(2.0, 2, 2), cfg).sum(axis=1).mean()
    assert mean_2 < mean_1
