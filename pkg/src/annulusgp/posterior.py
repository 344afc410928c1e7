"""Log joint density of readings and hyperparameters, and Gaussian conditioning.

Two prior variants are supported:

``simple``
    Half-normal scales on every mode, ``sigma_f`` and ``l``; uniform
    ``sigma_m`` on ``[0, epsilon]``.
``horseshoe``
    Regularized horseshoe on the mode scales: half-Cauchy locals
    ``lam_tilde``, inverse-gamma slab ``c`` and a global scale ``tau`` tied
    to ``sigma_m`` and the number of readings; ``sigma_f``, ``l`` and
    ``sigma_m`` keep their simple priors.

The sampler works in an unconstrained space: logs for every positive scale
and a scaled logit for ``sigma_m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.special import expit, gammaln

from . import _backend
from .core import (
    HarmonicModel,
    HyperParameterState,
    MeasurementSet,
    NumericalError,
    as_states,
    regularized_lam2,
)
from .kernels import DEFAULT_JITTER, as_locations, fourier_design_matrix, gram

__all__ = [
    "PriorSpec",
    "PredictiveGaussian",
    "Parameterization",
    "PosteriorModel",
    "cholesky_jittered",
    "log_likelihood",
    "log_prior",
    "log_posterior_and_grad",
    "global_scale",
    "predict",
    "ensemble_predict",
]

_LOG_HALF_NORMAL_0 = math.log(2.0) - 0.5 * math.log(2.0 * math.pi)
_LOG_HALF_CAUCHY_0 = math.log(2.0 / math.pi)


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameter prior.

    ``epsilon`` bounds the noise standard deviation; ``beta`` is the expected
    fraction of active modes (horseshoe only); ``gamma`` and ``s`` shape the
    inverse-gamma slab.
    """

    variant: str = "simple"
    epsilon: float = 1.0
    beta: float = 0.1
    gamma: float = 30.0
    s: float = 1.0

    def __post_init__(self):
        if self.variant not in ("simple", "horseshoe"):
            raise ValueError(f"unknown prior variant {self.variant!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not (self.gamma > 0 and self.s > 0):
            raise ValueError("gamma and s must be positive")


def global_scale(beta, sigma_m, n):
    """Horseshoe global scale ``beta sigma_m / ((1 - beta) sqrt(n))``."""
    return beta * sigma_m / ((1.0 - beta) * math.sqrt(n))


@dataclass(frozen=True)
class PredictiveGaussian:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def var(self) -> np.ndarray:
        return np.diag(self.cov).copy()

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(self.var, 0.0, None))


def cholesky_jittered(S, state=None, jitter=DEFAULT_JITTER, max_tries=5):
    """Lower Cholesky factor of ``S``, escalating diagonal jitter on failure.

    The first attempt factorizes ``S`` as given (callers add the default
    jitter themselves); each retry adds ``jitter * 10**k * mean(diag S)``.
    """
    n = S.shape[0]
    scale = max(np.trace(S) / n, np.finfo(float).tiny)
    extra = 0.0
    for k in range(max_tries):
        try:
            return cholesky(S + extra * np.eye(n), lower=True, check_finite=True)
        except (LinAlgError, ValueError):
            extra = jitter * 10.0 ** (k + 1) * scale
    raise NumericalError(f"covariance not positive definite after {max_tries} jitter escalations", state)


def _noisy_cov(data: MeasurementSet, state, model, jitter):
    K = gram(data.X, data.X, state, model)
    K = 0.5 * (K + K.T)
    n = K.shape[0]
    Kj = K + (jitter * np.trace(K) / n) * np.eye(n)
    return Kj, Kj + data.noise_covariance(state.sigma_m)


def log_likelihood(data: MeasurementSet, state: HyperParameterState, model: HarmonicModel,
                   jitter=DEFAULT_JITTER) -> float:
    """Log density of the centered readings under ``N(0, K + Sigma)``."""
    _, S = _noisy_cov(data, state, model, jitter)
    L = cholesky_jittered(S, state, jitter)
    z = solve_triangular(L, data.values, lower=True)
    n = len(data)
    return float(-0.5 * z @ z - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi))


def log_prior(state: HyperParameterState, spec: PriorSpec, n: int) -> float:
    """Prior log density in the constrained space (no Jacobian terms).

    For the horseshoe the latents ``c`` and ``lam_tilde`` carry the density;
    the mode scales are their deterministic image.
    """
    if not (0.0 <= state.sigma_m <= spec.epsilon):
        return -math.inf
    lp = -math.log(spec.epsilon)
    for x in (state.sigma_f, state.lengthscale):
        lp += _LOG_HALF_NORMAL_0 - 0.5 * x * x
    if spec.variant == "simple":
        lam = np.asarray(state.lam)
        return lp + float(np.sum(_LOG_HALF_NORMAL_0 - 0.5 * lam**2))
    if state.lam_tilde is None or state.c is None:
        raise ValueError("horseshoe prior needs a state with latents")
    a = spec.gamma / 2.0
    b = spec.gamma * spec.s**2 / 2.0
    c = state.c
    lp += a * math.log(b) - gammaln(a) - (a + 1.0) * math.log(c) - b / c
    lt = np.asarray(state.lam_tilde)
    return lp + float(np.sum(_LOG_HALF_CAUCHY_0 - np.log1p(lt**2)))


class Parameterization:
    """Map between constrained hyperparameters and the sampler's vector.

    Layout of the unconstrained vector ``u``:

    * simple: ``log lam (n_modes), log sigma_f, log l, logit(sigma_m / eps)``
    * horseshoe: ``log lam_tilde (n_modes), log c, log sigma_f, log l,
      logit(sigma_m / eps)``
    """

    def __init__(self, model: HarmonicModel, spec: PriorSpec, n_obs: int):
        self.model = model
        self.spec = spec
        self.n_obs = n_obs
        self.m = model.n_modes
        self.horseshoe = spec.variant == "horseshoe"
        self.dim = self.m + 3 + (1 if self.horseshoe else 0)

    @property
    def unconstrained_names(self) -> list[str]:
        m = self.m
        if self.horseshoe:
            return ([f"log_lam_tilde_{i}" for i in range(m)]
                    + ["log_c", "log_sigma_f", "log_lengthscale", "logit_sigma_m"])
        return [f"log_lam_{i}" for i in range(m)] + ["log_sigma_f", "log_lengthscale", "logit_sigma_m"]

    @property
    def constrained_names(self) -> list[str]:
        names = [f"lam_{i}" for i in range(self.m)] + ["sigma_f", "lengthscale", "sigma_m"]
        if self.horseshoe:
            names += ["c", "tau"] + [f"lam_tilde_{i}" for i in range(self.m)]
        return names

    def _split(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}")
        m = self.m
        if self.horseshoe:
            return u[:m], u[m], u[m + 1], u[m + 2], u[m + 3]
        return u[:m], None, u[m], u[m + 1], u[m + 2]

    def sigma_m(self, z):
        return self.spec.epsilon * float(expit(z))

    def to_state(self, u) -> HyperParameterState:
        a, log_c, log_sf, log_l, z = self._split(u)
        sm = self.sigma_m(z)
        if self.horseshoe:
            tau = global_scale(self.spec.beta, sm, self.n_obs)
            return HyperParameterState.from_horseshoe(np.exp(a), math.exp(log_c), tau,
                                                      math.exp(log_sf), math.exp(log_l), sm)
        return HyperParameterState(np.exp(a), math.exp(log_sf), math.exp(log_l), sm)

    def to_unconstrained(self, state: HyperParameterState) -> np.ndarray:
        z = math.log(state.sigma_m / self.spec.epsilon) - math.log1p(-state.sigma_m / self.spec.epsilon)
        tail = [math.log(state.sigma_f), math.log(state.lengthscale), z]
        if self.horseshoe:
            return np.concatenate([np.log(state.lam_tilde), [math.log(state.c)], tail])
        return np.concatenate([np.log(state.lam), tail])

    def constrained_row(self, u) -> np.ndarray:
        st = self.to_state(u)
        row = list(st.lam) + [st.sigma_f, st.lengthscale, st.sigma_m]
        if self.horseshoe:
            row += [st.c, st.tau] + list(st.lam_tilde)
        return np.array(row)

    def default_init(self) -> np.ndarray:
        """A central point of the prior, used to start chains."""
        mid = 0.0  # logit(1/2)
        if self.horseshoe:
            return np.concatenate([np.zeros(self.m), [0.0, 0.0, math.log(0.5), mid]])
        return np.concatenate([np.full(self.m, math.log(0.5)), [0.0, math.log(0.5), mid]])


class PosteriorModel:
    """Unnormalized log posterior over the unconstrained vector.

    Calling the instance returns ``(log density, gradient)``. Picklable, so
    chains can run in worker processes.
    """

    def __init__(self, data: MeasurementSet, model: HarmonicModel, spec: PriorSpec,
                 jitter=DEFAULT_JITTER):
        if data.noise is not None:
            raise ValueError("sampling treats the noise level as a hyperparameter; "
                             "build the MeasurementSet with noise=None")
        self.data = data
        self.model = model
        self.spec = spec
        self.jitter = jitter
        self.param = Parameterization(model, spec, len(data))
        self._FT = np.ascontiguousarray(fourier_design_matrix(data.theta, model).T)
        self._r = np.ascontiguousarray(data.r)
        self._f = np.ascontiguousarray(data.values)

    @property
    def dim(self) -> int:
        return self.param.dim

    def __call__(self, u):
        return self.logp_and_grad(u)

    def logp_and_grad(self, u):
        p = self.param
        spec = self.spec
        m = p.m
        u = np.asarray(u, dtype=float)
        if not np.all(np.abs(u) < 700.0):
            # far outside any plausible region; exp() would overflow
            return -math.inf, np.zeros(p.dim)
        a, log_c, log_sf, log_l, z = p._split(u)
        eps = spec.epsilon
        s = float(expit(z))
        sm = eps * s
        sf = math.exp(log_sf)
        ell = math.exp(log_l)
        grad = np.zeros(p.dim)
        # uniform sigma_m with its scaled-logit Jacobian (log eps cancels)
        if s <= 0.0 or s >= 1.0:
            return -math.inf, grad
        lp = math.log(s) + math.log1p(-s)
        d_z = 1.0 - 2.0 * s
        for x in (sf, ell):
            lp += _LOG_HALF_NORMAL_0 - 0.5 * x * x + math.log(x)

        if p.horseshoe:
            c = math.exp(log_c)
            tau = global_scale(spec.beta, sm, p.n_obs)
            # lam2 = c q / (c + q) with q = tau^2 lt^2, written as c * expit(log q - log c)
            frac = expit(2.0 * math.log(tau) + 2.0 * a - log_c)
            lam2 = c * frac
            ga = spec.gamma / 2.0
            gb = spec.gamma * spec.s**2 / 2.0
            lp += float(np.sum(_LOG_HALF_CAUCHY_0 - np.logaddexp(0.0, 2.0 * a) + a))
            lp += ga * math.log(gb) - gammaln(ga) - ga * log_c - gb / c
        else:
            lam2 = np.exp(2.0 * a)
            lp += float(np.sum(_LOG_HALF_NORMAL_0 - 0.5 * lam2 + a))

        try:
            ll, g_lam2, g_sf, g_l, g_nv = _backend.loglik_grad(
                self._FT, np.ascontiguousarray(lam2), self._r, self._f, sf, ell, sm * sm, self.jitter)
        except (LinAlgError, np.linalg.LinAlgError):
            return -math.inf, grad
        if not math.isfinite(ll):
            return -math.inf, grad

        grad[m + (1 if p.horseshoe else 0)] = g_sf * sf + 1.0 - sf * sf
        grad[m + (2 if p.horseshoe else 1)] = g_l * ell + 1.0 - ell * ell
        d_sm = g_nv * 2.0 * sm
        if p.horseshoe:
            dlam2_da = 2.0 * c * frac * (1.0 - frac)
            grad[:m] = g_lam2 * dlam2_da + 1.0 - 2.0 * expit(2.0 * a)
            grad[m] = float(np.sum(g_lam2 * c * frac**2)) - ga + gb / c
            # tau is proportional to sigma_m, so log q moves with 2 log sigma_m
            d_sm += float(np.sum(g_lam2 * dlam2_da)) / sm
        else:
            grad[:m] = g_lam2 * 2.0 * lam2 + 1.0 - lam2
        grad[-1] = d_sm * sm * (1.0 - s) + d_z
        value = lp + ll
        if not np.all(np.isfinite(grad)):
            return -math.inf, np.zeros(p.dim)
        return value, grad

    def to_state(self, u) -> HyperParameterState:
        return self.param.to_state(u)


def log_posterior_and_grad(data: MeasurementSet, u, spec: PriorSpec, model: HarmonicModel,
                           jitter=DEFAULT_JITTER):
    """``(log posterior + log|Jacobian|, gradient)`` at the unconstrained point ``u``."""
    return PosteriorModel(data, model, spec, jitter)(u)


def predict(data: MeasurementSet, state: HyperParameterState, X_star, model: HarmonicModel,
            add_offset=False, jitter=DEFAULT_JITTER) -> PredictiveGaussian:
    """Condition the field at ``X_star`` on the readings at one hyperparameter state."""
    Xs = as_locations(X_star)
    if Xs.shape[0] == 0:
        raise ValueError("no prediction locations")
    _, S = _noisy_cov(data, state, model, jitter)
    L = cholesky_jittered(S, state, jitter)
    Kx = gram(data.X, Xs, state, model)
    Kss = gram(Xs, Xs, state, model)
    A = solve_triangular(L, Kx, lower=True)
    mean = Kx.T @ cho_solve((L, True), data.values)
    cov = Kss - A.T @ A
    cov = 0.5 * (cov + cov.T)
    if add_offset:
        mean = mean + data.mean_offset
    return PredictiveGaussian(mean, cov)


def _predict_diag(data, state, Xs, model, jitter):
    _, S = _noisy_cov(data, state, model, jitter)
    L = cholesky_jittered(S, state, jitter)
    Kx = gram(data.X, Xs, state, model)
    F = fourier_design_matrix(Xs[:, 1], model)
    kss = state.sigma_f**2 * (np.asarray(state.lam)[:, None] ** 2 * F**2).sum(axis=0)
    A = solve_triangular(L, Kx, lower=True)
    mean = Kx.T @ cho_solve((L, True), data.values)
    return mean, kss - (A * A).sum(axis=0)


def ensemble_predict(data: MeasurementSet, chain, X_star, model: HarmonicModel,
                     add_offset=False, jitter=DEFAULT_JITTER):
    """Mixture mean and variance of the predictive field over the chain's draws.

    ``chain`` is a :class:`PosteriorChain` or a sequence of states.

    Returns
    -------
    mean, var : ndarray
        ``var = E[diag Psi + mu^2] - mean^2`` over draws.
    """
    Xs = as_locations(X_star)
    states = as_states(chain)
    if not states:
        raise ValueError("empty chain")
    mus = np.empty((len(states), Xs.shape[0]))
    vs = np.empty_like(mus)
    for i, s in enumerate(states):
        mus[i], vs[i] = _predict_diag(data, s, Xs, model, jitter)
    mean = mus.mean(axis=0)
    var = vs.mean(axis=0) + ((mus - mean) ** 2).mean(axis=0)
    if add_offset:
        mean = mean + data.mean_offset
    return mean, var
