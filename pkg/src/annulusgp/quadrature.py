"""Bayesian area averages over the annulus.

The area average of a field ``g`` is ``nu * int_0^1 int_0^{2 pi} g(r, t) h(r) dt dr``.
For the product kernel only the constant Fourier mode survives the
circumferential integral, so every kernel integral reduces to a radial one,
evaluated here by Gauss-Legendre quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .core import (
    AnnulusGeometry,
    HarmonicModel,
    HyperParameterState,
    MeasurementSet,
    NumericalError,
    as_states,
)
from .kernels import DEFAULT_JITTER, squared_exp_kernel
from .posterior import _noisy_cov, cholesky_jittered

__all__ = [
    "DEFAULT_ORDER",
    "MIN_ORDER",
    "AreaAverage",
    "EnsembleAreaAverage",
    "circumferential_mode_integrals",
    "radial_nodes",
    "kernel_line_integral",
    "kernel_double_integral",
    "area_average",
    "ensemble_area_average",
    "sector_weights",
    "sector_area_average",
]

DEFAULT_ORDER = 64
MIN_ORDER = 8


@dataclass(frozen=True)
class AreaAverage:
    """Posterior of the area average at one hyperparameter state.

    ``v`` and ``T`` are the single and double kernel integrals, kept for reuse
    by the decomposition and sensitivity code.
    """

    mean: float
    variance: float
    v: np.ndarray
    T: float

    @property
    def std(self) -> float:
        return math.sqrt(max(self.variance, 0.0))


@dataclass(frozen=True)
class EnsembleAreaAverage:
    """Mixture moments of the area average over a chain, with per-draw series."""

    mean: float
    variance: float
    per_draw_mean: np.ndarray
    per_draw_variance: np.ndarray

    @property
    def std(self) -> float:
        return math.sqrt(max(self.variance, 0.0))

    @property
    def n_draws(self) -> int:
        return self.per_draw_mean.size


def circumferential_mode_integrals(model: HarmonicModel, theta0: float = 0.0) -> np.ndarray:
    """Integral of each Fourier mode over one full turn starting at ``theta0`` (degrees).

    Constant mode gives ``2 pi``; every harmonic integrates to zero.
    """
    t0 = math.radians(theta0)
    w = np.asarray(model.frequencies, dtype=float)
    t1 = t0 + 2.0 * math.pi
    out = np.empty(model.n_modes)
    out[0] = 2.0 * math.pi
    out[1::2] = (np.cos(w * t0) - np.cos(w * t1)) / w
    out[2::2] = (np.sin(w * t1) - np.sin(w * t0)) / w
    return out


def radial_nodes(order: int = DEFAULT_ORDER):
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    if int(order) != order or order < MIN_ORDER:
        raise ValueError(f"quadrature order must be an integer >= {MIN_ORDER}, got {order}")
    x, w = np.polynomial.legendre.leggauss(int(order))
    return 0.5 * (x + 1.0), 0.5 * w


def _circ_factor(state: HyperParameterState, model: HarmonicModel) -> float:
    # harmonics integrate to exactly zero (see circumferential_mode_integrals)
    return 2.0 * math.pi * float(np.asarray(state.lam, dtype=float)[0]) ** 2


def kernel_line_integral(data, state: HyperParameterState, model: HarmonicModel,
                         geometry: AnnulusGeometry = AnnulusGeometry(), order=DEFAULT_ORDER):
    """``v_i = nu * int int k((r, t), x_i) h(r) dt dr`` for every reading location."""
    z, w = radial_nodes(order)
    r_obs = data.r if hasattr(data, "r") else np.asarray(data, float).reshape(-1, 2)[:, 0]
    ks = squared_exp_kernel(z, r_obs, state.sigma_f, state.lengthscale)
    return geometry.nu * _circ_factor(state, model) * ((w * geometry.h(z)) @ ks)


def kernel_line_integral_dr(data, state, model, geometry=AnnulusGeometry(), order=DEFAULT_ORDER):
    """Derivative of each ``v_i`` with respect to its own radius ``r_i``."""
    z, w = radial_nodes(order)
    r_obs = data.r if hasattr(data, "r") else np.asarray(data, float).reshape(-1, 2)[:, 0]
    ks = squared_exp_kernel(z, r_obs, state.sigma_f, state.lengthscale)
    ks = ks * (z[:, None] - r_obs[None, :]) / state.lengthscale**2
    return geometry.nu * _circ_factor(state, model) * ((w * geometry.h(z)) @ ks)


def kernel_double_integral(state: HyperParameterState, model: HarmonicModel,
                           geometry: AnnulusGeometry = AnnulusGeometry(), order=DEFAULT_ORDER) -> float:
    """``T = nu^2 * int int k(z, z') h(z) h(z') dz dz'`` over the annulus twice."""
    z, w = radial_nodes(order)
    wh = w * geometry.h(z)
    ks = squared_exp_kernel(z, z, state.sigma_f, state.lengthscale)
    lam1 = float(np.asarray(state.lam)[0])
    return float(lam1**2 * (2.0 * math.pi * geometry.nu) ** 2 * (wh @ ks @ wh))


def area_average(data: MeasurementSet, state: HyperParameterState, model: HarmonicModel,
                 geometry: AnnulusGeometry = AnnulusGeometry(), order=DEFAULT_ORDER,
                 jitter=DEFAULT_JITTER) -> AreaAverage:
    """Gaussian posterior of the area average; the mean includes the stored offset."""
    v = kernel_line_integral(data, state, model, geometry, order)
    T = kernel_double_integral(state, model, geometry, order)
    _, S = _noisy_cov(data, state, model, jitter)
    L = cholesky_jittered(S, state, jitter)
    w = cho_solve((L, True), v)
    mean = float(w @ data.values) + data.mean_offset
    explained = float(v @ w)
    var = T - explained
    if var < -1e-8 * max(T, explained, np.finfo(float).tiny):
        raise NumericalError(f"negative area-average variance {var:.3e} (T = {T:.3e})", state)
    return AreaAverage(mean, max(var, 0.0), v, T)


def ensemble_area_average(data: MeasurementSet, chain, model: HarmonicModel,
                          geometry: AnnulusGeometry = AnnulusGeometry(), order=DEFAULT_ORDER,
                          jitter=DEFAULT_JITTER) -> EnsembleAreaAverage:
    """Area-average moments marginalized over the draws of ``chain``.

    ``chain`` is a :class:`PosteriorChain` or a sequence of states.
    """
    states = as_states(chain)
    if not states:
        raise ValueError("empty chain")
    mus = np.empty(len(states))
    vs = np.empty(len(states))
    for i, s in enumerate(states):
        a = area_average(data, s, model, geometry, order, jitter)
        mus[i] = a.mean
        vs[i] = a.variance
    mean = float(mus.mean())
    var = float(vs.mean() + np.mean((mus - mean) ** 2))
    return EnsembleAreaAverage(mean, var, mus, vs)


def _cyclic_widths(angles):
    a = np.asarray(angles, dtype=float)
    if a.size == 1:
        return np.array([360.0])
    gaps = np.diff(np.concatenate([a, [a[0] + 360.0]]))
    # each rake owns half of the gap on either side
    return 0.5 * (gaps + np.roll(gaps, 1))


def _radial_int_h(a, b, geometry):
    ri, ro = geometry.r_inner, geometry.r_outer
    return (b - a) * ri + 0.5 * (b * b - a * a) * (ro - ri)


def sector_weights(data: MeasurementSet, geometry: AnnulusGeometry = AnnulusGeometry()) -> np.ndarray:
    """Annular-sector weight of every reading.

    A reading owns the sector between the circumferential midpoints to the
    neighbouring rakes and the radial midpoints to the neighbouring probes on
    its own rake; the outermost probes extend to hub and casing.
    """
    theta = np.mod(data.theta, 360.0)
    if theta.size == 0:
        raise ValueError("sector average needs at least one rake")
    rakes = np.unique(theta)
    widths = dict(zip(rakes.tolist(), _cyclic_widths(rakes).tolist()))
    weights = np.empty(theta.size)
    for t in rakes:
        idx = np.flatnonzero(theta == t)
        idx = idx[np.argsort(data.r[idx])]
        r = data.r[idx]
        mids = 0.5 * (r[1:] + r[:-1])
        lo = np.concatenate([[0.0], mids])
        hi = np.concatenate([mids, [1.0]])
        weights[idx] = widths[float(t)] * _radial_int_h(lo, hi, geometry)
    return weights


def sector_area_average(data: MeasurementSet, geometry: AnnulusGeometry = AnnulusGeometry()) -> float:
    """Classical sector-weighted area average of the raw readings."""
    w = sector_weights(data, geometry)
    return float(np.sum(w * data.values) / np.sum(w) + data.mean_offset)
