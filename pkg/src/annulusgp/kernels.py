"""Fourier x squared-exponential product kernel on the annulus.

The circumferential factor is ``F(theta)^T diag(lam^2) F(theta')`` with the
Fourier design matrix ``F``; the radial factor is a squared exponential in
normalized radius. The full kernel is their elementwise product.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import HarmonicModel, HyperParameterState, locations_array

__all__ = [
    "DEFAULT_JITTER",
    "GramBundle",
    "fourier_design_matrix",
    "fourier_design_matrix_dtheta",
    "fourier_kernel",
    "squared_exp_kernel",
    "gram",
    "gram_bundle",
    "gram_grad_hyper",
    "gram_grad_location",
    "as_locations",
    "jittered",
]

#: Relative jitter: ``jitter * mean(diag K)`` is added before factorizing.
DEFAULT_JITTER = 1e-8

_DEG = np.pi / 180.0


def as_locations(X) -> np.ndarray:
    """Coerce ProbeLocations or an ``(n, 2)`` array to an ``(n, 2)`` float array."""
    if isinstance(X, np.ndarray):
        X = np.asarray(X, dtype=float)
    elif hasattr(X, "X"):
        X = X.X
    elif len(X) and hasattr(X[0], "theta"):
        X = locations_array(X)
    else:
        X = np.asarray(X, dtype=float)
    X = X.reshape(-1, 2)
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite location")
    return X


def fourier_design_matrix(theta, model: HarmonicModel) -> np.ndarray:
    """``(2k+1, n)`` matrix with rows ``1, sin(w1 t), cos(w1 t), sin(w2 t), ...``.

    ``theta`` is in degrees.
    """
    t = np.asarray(theta, dtype=float).ravel() * _DEG
    if not np.all(np.isfinite(t)):
        raise ValueError("non-finite angle")
    w = np.asarray(model.frequencies, dtype=float)[:, None]
    F = np.empty((model.n_modes, t.size))
    F[0] = 1.0
    F[1::2] = np.sin(w * t)
    F[2::2] = np.cos(w * t)
    return F


def fourier_design_matrix_dtheta(theta, model: HarmonicModel) -> np.ndarray:
    """Derivative of :func:`fourier_design_matrix` with respect to theta in degrees."""
    t = np.asarray(theta, dtype=float).ravel() * _DEG
    w = np.asarray(model.frequencies, dtype=float)[:, None]
    dF = np.zeros((model.n_modes, t.size))
    dF[1::2] = w * _DEG * np.cos(w * t)
    dF[2::2] = -w * _DEG * np.sin(w * t)
    return dF


def _check_lam(lam, model):
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.size != model.n_modes:
        raise ValueError(f"{lam.size} mode scales for a model with {model.n_modes} modes")
    return lam


def fourier_kernel(theta, theta_prime, lam, model: HarmonicModel) -> np.ndarray:
    lam = _check_lam(lam, model)
    F1 = fourier_design_matrix(theta, model)
    F2 = fourier_design_matrix(theta_prime, model)
    return F1.T @ (lam[:, None] ** 2 * F2)


def squared_exp_kernel(r, r_prime, sigma_f, lengthscale) -> np.ndarray:
    if not lengthscale > 0:
        raise ValueError("lengthscale must be positive")
    if not sigma_f > 0:
        raise ValueError("sigma_f must be positive")
    d = np.asarray(r, float).ravel()[:, None] - np.asarray(r_prime, float).ravel()[None, :]
    return sigma_f**2 * np.exp(-0.5 * d * d / lengthscale**2)


def _gram_parts(X1, X2, state, model):
    X1 = as_locations(X1)
    X2 = as_locations(X2)
    lam = _check_lam(state.lam, model)
    FT1 = np.ascontiguousarray(fourier_design_matrix(X1[:, 1], model).T)
    FT2 = np.ascontiguousarray(fourier_design_matrix(X2[:, 1], model).T)
    return _backend.product_gram(FT1, FT2, np.ascontiguousarray(lam**2),
                                 np.ascontiguousarray(X1[:, 0]), np.ascontiguousarray(X2[:, 0]),
                                 state.sigma_f, state.lengthscale)


def gram(X, X_prime, state: HyperParameterState, model: HarmonicModel) -> np.ndarray:
    """Product-kernel Gram matrix between two location sets."""
    return _gram_parts(X, X_prime, state, model)[0]


def jittered(K: np.ndarray, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """``K + jitter * mean(diag K) * I``."""
    n = K.shape[0]
    return K + (jitter * np.trace(K) / n) * np.eye(n)


@dataclass(frozen=True)
class GramBundle:
    K_XX: np.ndarray
    K_XXstar: np.ndarray
    K_XstarXstar: np.ndarray
    state: HyperParameterState


def gram_bundle(X, X_star, state, model) -> GramBundle:
    K = gram(X, X, state, model)
    Kx = gram(X, X_star, state, model)
    Kss = gram(X_star, X_star, state, model)
    return GramBundle(0.5 * (K + K.T), Kx, 0.5 * (Kss + Kss.T), state)


def gram_grad_hyper(X, state: HyperParameterState, model: HarmonicModel) -> dict:
    """Derivatives of the self-Gram with respect to each hyperparameter.

    Returns a dict with keys ``"lam"`` (array ``(n_modes, N, N)``),
    ``"sigma_f"`` and ``"lengthscale"``.
    """
    X = as_locations(X)
    K, Kf, Ks = _gram_parts(X, X, state, model)
    F = fourier_design_matrix(X[:, 1], model)
    lam = _check_lam(state.lam, model)
    d_lam = 2.0 * lam[:, None, None] * (F[:, :, None] * F[:, None, :]) * Ks[None]
    d = X[:, 0][:, None] - X[:, 0][None, :]
    return {
        "lam": d_lam,
        "sigma_f": 2.0 * K / state.sigma_f,
        "lengthscale": K * d * d / state.lengthscale**3,
    }


def _location_derivs(X1, X2, state, model):
    """Derivatives of k(x1_i, x2_j) w.r.t. r and theta (degrees) of x1_i."""
    X1 = as_locations(X1)
    X2 = as_locations(X2)
    K, Kf, Ks = _gram_parts(X1, X2, state, model)
    lam2 = np.asarray(state.lam) ** 2
    dF1 = fourier_design_matrix_dtheta(X1[:, 1], model)
    F2 = fourier_design_matrix(X2[:, 1], model)
    dKf = dF1.T @ (lam2[:, None] * F2)
    d = X1[:, 0][:, None] - X2[:, 0][None, :]
    dK_dr = -K * d / state.lengthscale**2
    dK_dtheta = dKf * Ks
    return dK_dr, dK_dtheta


def gram_grad_location(X, state, model, which: int, coordinate: str) -> np.ndarray:
    """Derivative of the self-Gram w.r.t. one coordinate of location ``which``.

    ``coordinate`` is ``"r"`` or ``"theta"`` (per degree). Only row and column
    ``which`` are nonzero.
    """
    X = as_locations(X)
    n = X.shape[0]
    if not (0 <= which < n):
        raise IndexError(f"location index {which} out of range for {n} locations")
    if coordinate not in ("r", "theta"):
        raise ValueError("coordinate must be 'r' or 'theta'")
    dr, dt = _location_derivs(X[which:which + 1], X, state, model)
    row = (dr if coordinate == "r" else dt)[0]
    out = np.zeros((n, n))
    out[which, :] = row
    out[:, which] = row
    # both arguments of k(x_i, x_i) move
    out[which, which] = 2.0 * row[which]
    return out
