import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from annulusgp.sampler import (
    SamplerConfig,
    SamplerError,
    autocorr,
    diagnose,
    effective_sample_size,
    gelman_rubin,
    geweke,
    read_chains,
    sample,
    write_chains,
)


class Gaussian:
    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, float)
        self.prec = np.linalg.inv(cov)

    def __call__(self, x):
        d = x - self.mean
        return -0.5 * d @ self.prec @ d, -self.prec @ d


def half_normal_log(u):
    # x = exp(u) with x ~ half-normal(1); includes the log Jacobian u
    x = math.exp(u[0])
    return -0.5 * x * x + u[0], np.array([-x * x + 1.0])


def _pooled(chains, j):
    return np.concatenate([c.values[:, j] for c in chains])


class TestConfig:
    @pytest.mark.parametrize("kw", [{"chains": 0}, {"draws": 0}, {"tune": -1}, {"target_accept": 1.0},
                                    {"max_tree_depth": 0}, {"metric": "full"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SamplerConfig(**kw)


class TestMoments:
    @pytest.mark.parametrize("metric", ["diag", "dense"])
    def test_gaussian(self, metric):
        A = np.array([[1.0, 0.6, 0.0], [0.6, 2.0, -0.3], [0.0, -0.3, 0.5]])
        target = Gaussian([1.0, -2.0, 0.5], A)
        chains = sample(target, np.zeros(3), SamplerConfig(chains=2, tune=300, draws=1000, seed=1,
                                                           metric=metric))
        for j in range(3):
            x = _pooled(chains, j)
            ess = effective_sample_size(chains, j)
            assert abs(x.mean() - target.mean[j]) < 4 * math.sqrt(A[j, j] / ess)
            assert abs(x.var() - A[j, j]) < 4 * A[j, j] * math.sqrt(2.0 / ess)

    def test_half_normal_mean(self):
        chains = sample(half_normal_log, [0.0], SamplerConfig(chains=2, tune=300, draws=1500, seed=2))
        x = np.exp(_pooled(chains, 0))
        ess = effective_sample_size(np.exp(np.array([c.values[:, 0] for c in chains])))
        sd = math.sqrt(1.0 - 2.0 / math.pi)
        assert abs(x.mean() - math.sqrt(2.0 / math.pi)) < 4 * sd / math.sqrt(ess)

    def test_few_divergences_on_gaussian(self):
        chains = sample(Gaussian([0.0, 0.0], np.eye(2)), np.zeros(2),
                        SamplerConfig(chains=1, tune=200, draws=300, seed=3))
        assert chains[0].n_divergent == 0
        assert 0.0 < chains[0].step_size < 10.0


class TestDeterminism:
    def test_same_seed_same_draws(self):
        cfg = SamplerConfig(chains=2, tune=50, draws=50, seed=7)
        t = Gaussian([0.0, 1.0], np.eye(2))
        a, b = sample(t, np.zeros(2), cfg), sample(t, np.zeros(2), cfg)
        for x, y in zip(a, b):
            assert_array_equal(x.values, y.values)

    def test_worker_processes_do_not_change_draws(self):
        cfg = SamplerConfig(chains=2, tune=30, draws=30, seed=8)
        t = Gaussian([0.0, 1.0], np.eye(2))
        a, b = sample(t, np.zeros(2), cfg, n_jobs=1), sample(t, np.zeros(2), cfg, n_jobs=2)
        for x, y in zip(a, b):
            assert_array_equal(x.values, y.values)

    def test_different_seed_differs(self):
        t = Gaussian([0.0], np.eye(1))
        a = sample(t, np.zeros(1), SamplerConfig(chains=1, tune=20, draws=20, seed=1))
        b = sample(t, np.zeros(1), SamplerConfig(chains=1, tune=20, draws=20, seed=2))
        assert not np.array_equal(a[0].values, b[0].values)

    def test_bad_init(self):
        with pytest.raises(SamplerError):
            sample(lambda x: (-math.inf, np.zeros(1)), np.zeros(1), SamplerConfig(chains=1))


def _split_rhat_reference(x):
    halves = []
    for c in x:
        h = len(c) // 2
        halves += [c[:h], c[-h:]]
    m, n = len(halves), len(halves[0])
    means = [sum(h) / n for h in halves]
    grand = sum(means) / m
    B = n / (m - 1) * sum((mu - grand) ** 2 for mu in means)
    W = sum(sum((v - mu) ** 2 for v in h) / (n - 1) for h, mu in zip(halves, means)) / m
    return math.sqrt(((n - 1) / n * W + B / n) / W)


class TestDiagnostics:
    def test_rhat_matches_reference(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(4, 200)) + np.array([[0.0], [0.1], [0.0], [0.3]])
        assert_allclose(gelman_rubin(x), _split_rhat_reference(x.tolist()), rtol=1e-12)

    def test_rhat_cases(self):
        rng = np.random.default_rng(1)
        assert gelman_rubin(rng.normal(size=(4, 1000))) < 1.01
        assert gelman_rubin(rng.normal(size=(4, 1000)) + np.arange(4)[:, None]) > 1.5
        # a trend inside each chain is caught by splitting
        assert gelman_rubin(np.tile(np.linspace(0, 5, 1000), (4, 1))) > 1.5

    def test_autocorr_ar1(self):
        rng = np.random.default_rng(2)
        phi, n = 0.7, 200_000
        e = rng.normal(size=n)
        x = np.empty(n)
        x[0] = e[0]
        for i in range(1, n):
            x[i] = phi * x[i - 1] + e[i]
        rho = autocorr(x, max_lag=5)
        assert_allclose(rho, phi ** np.arange(6), atol=0.01)

    def test_ess(self):
        rng = np.random.default_rng(3)
        iid = rng.normal(size=(2, 2000))
        assert effective_sample_size(iid) > 3000
        phi = 0.8
        x = np.empty((2, 20000))
        for c in range(2):
            e = rng.normal(size=20000)
            x[c, 0] = e[0]
            for i in range(1, 20000):
                x[c, i] = phi * x[c, i - 1] + e[i]
        expected = 40000 * (1 - phi) / (1 + phi)
        assert abs(effective_sample_size(x) / expected - 1) < 0.2

    def test_geweke_calibrated_on_white_noise(self):
        rng = np.random.default_rng(4)
        z = np.array([geweke(rng.normal(size=500)) for _ in range(400)])
        assert 0.9 <= np.mean(np.abs(z) <= 2) <= 0.99
        assert abs(np.mean(z)) < 0.2

    def test_geweke_detects_drift(self):
        x = np.linspace(0, 1, 500) + np.random.default_rng(5).normal(scale=0.05, size=500)
        assert abs(geweke(x)) > 5

    def test_geweke_constant(self):
        assert geweke(np.ones(100)) == 0.0

    def test_geweke_bad_fractions(self):
        with pytest.raises(ValueError):
            geweke(np.ones(100), first=0.6, last=0.6)


def test_diagnose_and_round_trip(tmp_path):
    chains = sample(Gaussian([0.0, 1.0], np.eye(2)), np.zeros(2),
                    SamplerConfig(chains=2, tune=50, draws=100, seed=9))
    diag = diagnose(chains)
    assert set(diag.rhat) == {"x0", "x1"}
    assert diag.max_rhat() < 1.2
    assert 0.0 <= diag.geweke_fraction_within() <= 1.0
    write_chains(chains, tmp_path, diag)
    back = read_chains(tmp_path)
    assert len(back) == 2
    for a, b in zip(chains, back):
        assert_array_equal(a.values, b.values)
        assert a.param_names == b.param_names
