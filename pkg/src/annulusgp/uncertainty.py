"""Split posterior uncertainty into measurement-imprecision and sampling parts.

By the law of total covariance the predictive covariance at one
hyperparameter state is

    Psi* = K*' K^-1 Psi_f K^-1 K*  +  (K** - K*' K^-1 K*)

where ``Psi_f = (K^-1 + Sigma^-1)^-1 = K S^-1 Sigma`` is the posterior
covariance of the noise-free readings. The first term is the measurement
part, the second the spatial sampling part. The same jittered ``K`` is used
throughout so the two parts add up to the total exactly (Woodbury).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .core import AnnulusGeometry, HarmonicModel, HyperParameterState, MeasurementSet, as_states
from .kernels import DEFAULT_JITTER, as_locations, gram
from .posterior import _noisy_cov, cholesky_jittered
from .quadrature import DEFAULT_ORDER, kernel_double_integral, kernel_line_integral

__all__ = [
    "Decomposition",
    "EnsembleDecomposition",
    "noise_free_covariance",
    "field_decomposition",
    "area_decomposition",
    "ensemble_decomposition",
]


@dataclass(frozen=True)
class Decomposition:
    """Measurement and sampling parts of a posterior (co)variance.

    ``total`` is computed independently from the noisy covariance, so
    ``measurement + sampling - total`` is a genuine consistency check.
    """

    measurement: np.ndarray | float
    sampling: np.ndarray | float
    total: np.ndarray | float

    def residual(self) -> float:
        """Relative mismatch ``|meas + samp - total| / |total|`` (Frobenius norm)."""
        d = np.linalg.norm(np.atleast_1d(self.measurement + self.sampling - self.total))
        t = np.linalg.norm(np.atleast_1d(self.total))
        return float(d / t) if t > 0 else float(d)


@dataclass(frozen=True)
class EnsembleDecomposition:
    """Area-average decomposition averaged over draws, with per-draw series."""

    measurement: float
    sampling: float
    total: float
    per_draw_measurement: np.ndarray
    per_draw_sampling: np.ndarray
    per_draw_total: np.ndarray


def _factors(data, state, model, jitter):
    Kj, S = _noisy_cov(data, state, model, jitter)
    Sigma = data.noise_covariance(state.sigma_m)
    if np.linalg.eigvalsh(Sigma).min() <= 0:
        raise ValueError("the decomposition needs a positive definite noise covariance "
                         "(sigma_m > 0); use predict or area_average for the total only")
    LK = cholesky_jittered(Kj, state, jitter)
    LS = cholesky_jittered(S, state, jitter)
    return Kj, S, Sigma, LK, LS


def noise_free_covariance(data: MeasurementSet, state: HyperParameterState, model: HarmonicModel,
                          jitter=DEFAULT_JITTER) -> np.ndarray:
    """``Psi_f = K (K + Sigma)^-1 Sigma``, the posterior covariance of the noise-free readings."""
    Kj, S, Sigma, LK, LS = _factors(data, state, model, jitter)
    P = Kj @ cho_solve((LS, True), Sigma)
    return 0.5 * (P + P.T)


def field_decomposition(data: MeasurementSet, state: HyperParameterState, X_star,
                        model: HarmonicModel, jitter=DEFAULT_JITTER) -> Decomposition:
    """Measurement and sampling parts of the predictive covariance at ``X_star``."""
    Xs = as_locations(X_star)
    Kj, S, Sigma, LK, LS = _factors(data, state, model, jitter)
    Kx = gram(data.X, Xs, state, model)
    Kss = gram(Xs, Xs, state, model)
    Kss = 0.5 * (Kss + Kss.T)
    A = cho_solve((LK, True), Kx)                    # K^-1 K*
    # K*' K^-1 Psi_f K^-1 K* with Psi_f = K S^-1 Sigma
    meas = cho_solve((LS, True), Kx).T @ Sigma @ A
    B = solve_triangular(LK, Kx, lower=True)
    samp = Kss - B.T @ B
    C = solve_triangular(LS, Kx, lower=True)
    total = Kss - C.T @ C
    sym = lambda M: 0.5 * (M + M.T)  # noqa: E731
    return Decomposition(sym(meas), sym(samp), sym(total))


def area_decomposition(data: MeasurementSet, state: HyperParameterState, model: HarmonicModel,
                       geometry: AnnulusGeometry = AnnulusGeometry(), order=DEFAULT_ORDER,
                       jitter=DEFAULT_JITTER) -> Decomposition:
    """Scalar measurement and sampling parts of the area-average variance."""
    Kj, S, Sigma, LK, LS = _factors(data, state, model, jitter)
    v = kernel_line_integral(data, state, model, geometry, order)
    T = kernel_double_integral(state, model, geometry, order)
    a = cho_solve((LK, True), v)
    meas = float(cho_solve((LS, True), v) @ Sigma @ a)
    b = solve_triangular(LK, v, lower=True)
    samp = T - float(b @ b)
    c = solve_triangular(LS, v, lower=True)
    total = T - float(c @ c)
    return Decomposition(meas, samp, total)


def ensemble_decomposition(data: MeasurementSet, chain, model: HarmonicModel,
                           geometry: AnnulusGeometry = AnnulusGeometry(), order=DEFAULT_ORDER,
                           jitter=DEFAULT_JITTER) -> EnsembleDecomposition:
    """Draw-averaged area decomposition. ``chain`` is a chain or a sequence of states."""
    states = as_states(chain)
    if not states:
        raise ValueError("empty chain")
    parts = np.array([[d.measurement, d.sampling, d.total]
                      for d in (area_decomposition(data, s, model, geometry, order, jitter)
                                for s in states)])
    m = parts.mean(axis=0)
    return EnsembleDecomposition(float(m[0]), float(m[1]), float(m[2]),
                                 parts[:, 0], parts[:, 1], parts[:, 2])
