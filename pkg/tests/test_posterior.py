import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from annulusgp import HarmonicModel, HyperParameterState, NumericalError, PosteriorModel, PriorSpec
from annulusgp.posterior import (
    Parameterization,
    cholesky_jittered,
    ensemble_predict,
    global_scale,
    log_likelihood,
    log_prior,
    predict,
)

from _helpers import (
    central_diff,
    grad_rel_err,
    gram_elementwise,
    noisy_cov_reference,
    random_data,
    random_instance,
    random_locations,
)


class TestPredict:
    def test_block_conditioning_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            data, state, model = random_instance(rng)
            Xs = np.array([[p.r, p.theta] for p in random_locations(rng, 4)])
            K, S = noisy_cov_reference(data, state, model)
            Kx = gram_elementwise(data.X, Xs, state, model)
            Kss = gram_elementwise(Xs, Xs, state, model)
            mean = Kx.T @ np.linalg.solve(S, data.values)
            cov = Kss - Kx.T @ np.linalg.solve(S, Kx)
            p = predict(data, state, Xs, model)
            assert_allclose(p.mean, mean, atol=1e-9)
            assert_allclose(p.cov, cov, atol=1e-9)

    def test_offset(self):
        rng = np.random.default_rng(11)
        data, state, model = random_instance(rng)
        X = data.X[:1]
        a = predict(data, state, X, model)
        b = predict(data, state, X, model, add_offset=True)
        assert_allclose(b.mean - a.mean, data.mean_offset)

    def test_interpolates_noise_free(self):
        rng = np.random.default_rng(12)
        data = random_data(rng, 6, noise=0.0)
        model = HarmonicModel((1, 2))
        state = HyperParameterState(np.ones(5), 1.0, 0.3, 0.0)
        p = predict(data, state, data.X, model)
        assert_allclose(p.mean, data.values, atol=1e-4)
        assert np.all(p.var < 1e-4)

    def test_ensemble_single_state_matches(self):
        rng = np.random.default_rng(13)
        data, state, model = random_instance(rng)
        Xs = np.array([[p.r, p.theta] for p in random_locations(rng, 3)])
        mean, var = ensemble_predict(data, [state], Xs, model)
        p = predict(data, state, Xs, model)
        assert_allclose(mean, p.mean, atol=1e-12)
        assert_allclose(var, p.var, atol=1e-10)

    def test_ensemble_mixture_variance(self):
        rng = np.random.default_rng(14)
        data, s1, model = random_instance(rng)
        s2 = HyperParameterState(s1.lam * 1.3, s1.sigma_f, s1.lengthscale * 0.8, s1.sigma_m)
        Xs = data.X[:2] + np.array([0.0, 1.0])
        p1, p2 = predict(data, s1, Xs, model), predict(data, s2, Xs, model)
        mean, var = ensemble_predict(data, [s1, s2], Xs, model)
        m = 0.5 * (p1.mean + p2.mean)
        v = 0.5 * (p1.var + p1.mean**2 + p2.var + p2.mean**2) - m**2
        assert_allclose(mean, m, atol=1e-12)
        assert_allclose(var, v, rtol=1e-9)


class TestLikelihoodAndPrior:
    def test_likelihood_matches_scipy(self):
        rng = np.random.default_rng(20)
        for _ in range(5):
            data, state, model = random_instance(rng)
            _, S = noisy_cov_reference(data, state, model)
            ref = stats.multivariate_normal(np.zeros(len(data)), S).logpdf(data.values)
            assert_allclose(log_likelihood(data, state, model), ref, rtol=1e-10)

    def test_simple_prior(self):
        s = HyperParameterState([0.3, 1.2, 0.7], 0.9, 0.4, 0.25)
        spec = PriorSpec(epsilon=0.5)
        ref = stats.halfnorm.logpdf([0.3, 1.2, 0.7, 0.9, 0.4]).sum() + math.log(1 / 0.5)
        assert_allclose(log_prior(s, spec, 10), ref, rtol=1e-13)
        bad = HyperParameterState([0.3, 1.2, 0.7], 0.9, 0.4, 0.6)
        assert log_prior(bad, spec, 10) == -math.inf

    def test_horseshoe_prior(self):
        spec = PriorSpec(variant="horseshoe", epsilon=1.0, gamma=30.0, s=1.0)
        tau = global_scale(spec.beta, 0.2, 20)
        s = HyperParameterState.from_horseshoe([0.5, 2.0, 7.0], 1.3, tau, 0.9, 0.4, 0.2)
        ref = (stats.halfcauchy.logpdf([0.5, 2.0, 7.0]).sum()
               + stats.invgamma(15.0, scale=15.0).logpdf(1.3)
               + stats.halfnorm.logpdf([0.9, 0.4]).sum())
        assert_allclose(log_prior(s, spec, 20), ref, rtol=1e-13)

    def test_global_scale_example(self):
        assert_allclose(global_scale(0.1, 0.1, 49), 1.587e-3, rtol=1e-3)


class TestParameterization:
    @pytest.mark.parametrize("variant", ["simple", "horseshoe"])
    def test_round_trip(self, variant):
        rng = np.random.default_rng(30)
        p = Parameterization(HarmonicModel((1, 4)), PriorSpec(variant=variant), 30)
        for _ in range(10):
            u = rng.normal(size=p.dim)
            assert_allclose(p.to_unconstrained(p.to_state(u)), u, atol=1e-9)

    def test_horseshoe_bounds(self):
        rng = np.random.default_rng(31)
        p = Parameterization(HarmonicModel((1, 2, 3)), PriorSpec(variant="horseshoe"), 30)
        for _ in range(50):
            s = p.to_state(rng.normal(scale=3.0, size=p.dim))
            assert np.all(s.lam2 <= s.c * (1 + 1e-12))
            assert np.all(s.lam2 <= (s.tau * s.lam_tilde) ** 2 * (1 + 1e-12))

    def test_sigma_m_within_bounds(self):
        p = Parameterization(HarmonicModel((1,)), PriorSpec(epsilon=0.3), 10)
        for z in (-30.0, 0.0, 30.0):
            assert 0.0 <= p.sigma_m(z) <= 0.3

    def test_logit_jacobian_peak(self):
        # log(s (1 - s)) peaks at z = 0 where sigma_m = epsilon / 2
        p = Parameterization(HarmonicModel((1,)), PriorSpec(epsilon=0.8), 10)
        assert p.sigma_m(0.0) == 0.4


def _random_u(rng, target):
    u = target.param.default_init() + rng.normal(scale=0.5, size=target.dim)
    return u


class TestLogPosterior:
    @pytest.mark.parametrize("variant", ["simple", "horseshoe"])
    def test_value_is_prior_likelihood_jacobian(self, variant):
        rng = np.random.default_rng(40)
        data = random_data(rng, 8)
        model = HarmonicModel((1, 3))
        spec = PriorSpec(variant=variant, epsilon=0.7)
        target = PosteriorModel(data, model, spec)
        for _ in range(5):
            u = _random_u(rng, target)
            s = target.to_state(u)
            frac = s.sigma_m / spec.epsilon
            log_jac = math.log(s.sigma_f) + math.log(s.lengthscale) + math.log(
                spec.epsilon * frac * (1 - frac))
            if variant == "simple":
                log_jac += np.log(s.lam).sum()
            else:
                log_jac += np.log(s.lam_tilde).sum() + math.log(s.c)
            ref = log_likelihood(data, s, model) + log_prior(s, spec, len(data)) + log_jac
            assert_allclose(target(u)[0], ref, rtol=1e-10)

    @pytest.mark.parametrize("variant", ["simple", "horseshoe"])
    def test_gradient(self, variant):
        rng = np.random.default_rng(41)
        data = random_data(rng, 10)
        target = PosteriorModel(data, HarmonicModel((1, 4, 7)), PriorSpec(variant=variant))
        for _ in range(5):
            u = _random_u(rng, target)
            fd = central_diff(lambda x: target(x)[0], u, 1e-6)
            assert grad_rel_err(target(u)[1], fd) < 1e-6

    def test_far_point_is_minus_inf(self):
        rng = np.random.default_rng(42)
        target = PosteriorModel(random_data(rng, 5), HarmonicModel((1,)), PriorSpec())
        u = np.full(target.dim, 800.0)
        lp, g = target(u)
        assert lp == -math.inf and np.all(g == 0)

    def test_fixed_noise_rejected(self):
        rng = np.random.default_rng(43)
        with pytest.raises(ValueError, match="noise=None"):
            PosteriorModel(random_data(rng, 5, noise=0.01), HarmonicModel((1,)), PriorSpec())


class TestPriorSpec:
    @pytest.mark.parametrize("kw", [{"variant": "x"}, {"epsilon": 0.0}, {"beta": 1.0}, {"gamma": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PriorSpec(**kw)


def test_cholesky_escalates_and_fails():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    L = cholesky_jittered(A)
    assert np.all(np.isfinite(L))
    with pytest.raises(NumericalError):
        cholesky_jittered(-np.eye(2))
