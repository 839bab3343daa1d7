import math

import numpy as np
import pytest

from nnd.distributions import NndParams, sample_nnd_via_svd
from nnd.linalg import nuclear_norm
from nnd.models import (
    CompletionModel,
    DenoisingModel,
    PriorModel,
    fit_lambda_moment,
    lambda_grid,
    log_posterior_complete,
    log_posterior_denoise,
    make_lowrank_problem,
    metrics,
    posterior_mean,
    run_experiment,
)
from nnd.samplers import ChainConfig, ChainOutput, HyperState, run_chain


class TestLogPosteriors:
    def test_perfect_fit_zero_rate(self, rng):
        y = rng.standard_normal((3, 3))
        model = DenoisingModel(y=y, hyper=HyperState(lam=0.0, gamma2=1.0))
        assert log_posterior_denoise(y, model) == 0.0

    def test_conditional_scaling_halves_prior_coefficient(self, rng):
        # replacing gamma2 by 4*gamma2 halves the lam/sqrt(gamma2) coefficient
        y = rng.standard_normal((2, 3))
        x = rng.standard_normal((2, 3))
        lam = 1.3
        m1 = DenoisingModel(y=y, hyper=HyperState(lam=lam, gamma2=1.0))
        m4 = DenoisingModel(y=y, hyper=HyperState(lam=lam, gamma2=4.0))

        def prior_term(model, z):
            like = -float(np.sum((y - z) ** 2)) / (2 * model.hyper.gamma2)
            rate = lam / math.sqrt(model.hyper.gamma2)
            norm_const = z.size * math.log(rate)
            return log_posterior_denoise(z, model) - like - norm_const

        assert prior_term(m4, x) == pytest.approx(prior_term(m1, x) / 2.0, rel=1e-12)

    def test_full_mask_equals_denoise(self, rng):
        y = rng.standard_normal((3, 2))
        hyper = HyperState(lam=0.7, gamma2=0.4)
        dm = DenoisingModel(y=y, hyper=hyper)
        cm = CompletionModel(y=y, mask=np.ones_like(y), hyper=hyper)
        for _ in range(5):
            x = rng.standard_normal((3, 2))
            assert log_posterior_complete(x, cm) == pytest.approx(
                log_posterior_denoise(x, dm), rel=1e-13)

    def test_hidden_entries_only_touch_prior(self, rng):
        y = rng.standard_normal((2, 2))
        mask = np.array([[1.0, 1.0], [1.0, 0.0]])
        cm = CompletionModel(y=y, mask=mask, hyper=HyperState(lam=0.9, gamma2=0.5))
        x = rng.standard_normal((2, 2))
        x2 = x.copy()
        x2[1, 1] += 0.3
        delta_post = log_posterior_complete(x2, cm) - log_posterior_complete(x, cm)
        rate = 0.9 / math.sqrt(0.5)
        delta_prior = -rate * (nuclear_norm(x2) - nuclear_norm(x))
        assert delta_post == pytest.approx(delta_prior, rel=1e-10)

    def test_masked_gradient_by_finite_differences(self, rng):
        y = rng.standard_normal((3, 3))
        mask = (rng.uniform(size=(3, 3)) > 0.4).astype(float)
        g2 = 0.3
        x = rng.standard_normal((3, 3))
        # smooth part only: -||mask*(y-x)||^2 / (2 g2)
        grad = mask * (x - y) / g2
        eps = 1e-6
        for idx in np.ndindex(3, 3):
            xp, xm = x.copy(), x.copy()
            xp[idx] += eps
            xm[idx] -= eps
            fd = (np.sum((mask * (y - xp)) ** 2) - np.sum((mask * (y - xm)) ** 2)) \
                / (2 * eps) / (-2 * g2)
            assert fd == pytest.approx(-grad[idx], abs=1e-4)

    def test_shape_mismatch(self, rng):
        model = DenoisingModel(y=np.eye(2), hyper=HyperState())
        with pytest.raises(ValueError):
            log_posterior_denoise(np.eye(3), model)


class TestPosteriorMean:
    def test_single_draw(self):
        out = ChainOutput(draws=np.ones((1, 2, 2)), traces={}, acceptance_rates={},
                          wall_time=0.0)
        assert np.array_equal(posterior_mean(out), np.ones((2, 2)))

    def test_two_draws(self):
        a = np.zeros((2, 2))
        b = np.full((2, 2), 2.0)
        out = ChainOutput(draws=np.stack([a, b]), traces={}, acceptance_rates={},
                          wall_time=0.0)
        assert np.array_equal(posterior_mean(out), np.ones((2, 2)))

    def test_empty_draws_rejected(self):
        out = ChainOutput(draws=np.empty((0, 2, 2)), traces={},
                          acceptance_rates={}, wall_time=0.0)
        with pytest.raises(ValueError):
            posterior_mean(out)

    def test_prior_1x1_mean_near_zero(self):
        cfg = ChainConfig(iterations=40000, burn_in=2000, seed=12)
        out = run_chain(PriorModel(NndParams(1.0, 1, 1)), cfg)
        from nnd.diagnostics import ess

        draws = out.draws[:, 0, 0]
        se = draws.std() / math.sqrt(ess(draws).ess)
        assert abs(draws.mean()) < 3 * se


class TestFitLambda:
    def test_identity_case(self):
        x = np.diag([2.0, 2.0])  # nuclear norm 4 = nm
        assert fit_lambda_moment([x]) == pytest.approx(1.0)

    def test_recovers_rate_from_sample(self):
        cfg = ChainConfig(iterations=30000, burn_in=2000, thinning=3, seed=15)
        draws = sample_nnd_via_svd(NndParams(2.0, 3, 3), cfg)
        lam_hat = fit_lambda_moment(list(draws))
        assert 1.9 <= lam_hat <= 2.1, lam_hat

    def test_scaling_equivariance(self, rng):
        mats = [rng.standard_normal((2, 3)) for _ in range(5)]
        base = fit_lambda_moment(mats)
        scaled = fit_lambda_moment([3.0 * m for m in mats])
        assert scaled == pytest.approx(base / 3.0, rel=1e-12)

    def test_error_cases(self):
        with pytest.raises(ValueError):
            fit_lambda_moment([])
        with pytest.raises(ValueError):
            fit_lambda_moment([np.zeros((2, 2))])
        with pytest.raises(ValueError):
            fit_lambda_moment([np.eye(2), np.eye(3)])


class TestMetrics:
    def test_exact_estimate(self):
        m = metrics(np.eye(3), np.eye(3))
        assert m.sse == 0.0 and m.mse_all == 0.0

    def test_unit_difference(self):
        truth = np.zeros((2, 2))
        est = truth.copy()
        est[0, 1] = 1.0
        m = metrics(truth, est)
        assert m.sse == pytest.approx(1.0)
        assert m.mse_all == pytest.approx(0.25)

    def test_noise_floor(self, rng):
        truth = np.zeros((40, 40))
        noisy = truth + 0.1 * rng.standard_normal((40, 40))
        m = metrics(truth, noisy)
        assert m.mse_all == pytest.approx(0.01, rel=0.15)

    def test_hidden_restriction(self):
        truth = np.zeros((2, 2))
        est = np.array([[0.0, 0.0], [0.0, 2.0]])
        mask = np.array([[1.0, 1.0], [1.0, 0.0]])
        m = metrics(truth, est, mask)
        assert m.mse_hidden == pytest.approx(4.0)
        assert m.mse_all == pytest.approx(1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            metrics(np.eye(2), np.eye(3))


class TestExperimentHelpers:
    def test_lambda_grid_defaults(self):
        g = lambda_grid()
        assert g.size == 10
        assert g[0] == pytest.approx(0.01)
        assert g[-1] == pytest.approx(100.0)

    def test_make_problem_shapes(self, rng):
        truth, y, mask = make_lowrank_problem(6, 4, 2, rng, hide_prob=0.5)
        assert truth.shape == y.shape == mask.shape == (6, 4)
        assert np.linalg.matrix_rank(truth) == 2
        assert set(np.unique(mask)) <= {0.0, 1.0}
        assert np.all(y[mask == 0.0] == 0.0)

    def test_monotone_shrinkage_in_rate(self):
        rng = np.random.default_rng(5)
        truth, y, _ = make_lowrank_problem(5, 5, 1, rng)
        norms = []
        for lam in (0.1, 1.0, 10.0, 100.0):
            hyper = HyperState(lam=lam, gamma2=0.01)
            cfg = ChainConfig(iterations=4000, burn_in=1000, seed=3)
            result, _ = run_experiment(DenoisingModel(y=y, hyper=hyper), cfg,
                                       truth=truth)
            norms.append(nuclear_norm(result.posterior_mean))
        assert all(a >= b - 1e-9 for a, b in zip(norms, norms[1:])), norms

    def test_full_mask_completion_matches_denoising(self):
        rng = np.random.default_rng(9)
        truth, y, _ = make_lowrank_problem(4, 4, 1, rng)
        hyper = HyperState(lam=1.0, gamma2=0.01)
        cfg = ChainConfig(iterations=12000, burn_in=2000, seed=21)
        res_d, out_d = run_experiment(DenoisingModel(y=y, hyper=hyper), cfg,
                                      truth=truth)
        res_c, out_c = run_experiment(
            CompletionModel(y=y, mask=np.ones_like(y), hyper=hyper),
            ChainConfig(iterations=12000, burn_in=2000, seed=22), truth=truth)
        diff = np.abs(res_d.posterior_mean - res_c.posterior_mean)
        # entrywise Monte Carlo error of each mean
        n_eff = 500.0  # conservative effective count for 10000 draws
        se = (out_d.draws.std(axis=0) + out_c.draws.std(axis=0)) / math.sqrt(n_eff)
        assert np.all(diff < 4.0 * se + 1e-3), (diff.max(), se.max())