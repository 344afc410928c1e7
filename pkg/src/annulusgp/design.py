"""Sensitivities of the area average and placement of an additional rake.

With ``S = K + Sigma``, ``alpha = S^-1 f`` and ``w = S^-1 v``:

    mu      = v' alpha
    sigma^2 = T - v' w

so a perturbation ``dX`` of a location changes them by

    d mu      = dv' alpha - w' dS alpha
    d sigma^2 = -2 dv' w + w' dS w

``T`` does not depend on the reading locations. ``v`` depends on radius
only, so the circumferential ``dv`` vanishes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .core import AnnulusGeometry, HarmonicModel, HyperParameterState, MeasurementSet, as_states
from .kernels import DEFAULT_JITTER, _location_derivs, gram
from .posterior import _noisy_cov, cholesky_jittered
from .quadrature import (
    DEFAULT_ORDER,
    kernel_double_integral,
    kernel_line_integral,
    kernel_line_integral_dr,
)

__all__ = [
    "PlacementResult",
    "dmu_df",
    "dmu_dX",
    "dsigma2_dX",
    "placement_objective",
    "placement_objective_grad",
    "place_rake",
]


def _solve(data, state, model, geometry, order, jitter):
    _, S = _noisy_cov(data, state, model, jitter)
    L = cholesky_jittered(S, state, jitter)
    v = kernel_line_integral(data, state, model, geometry, order)
    return L, v, cho_solve((L, True), v), cho_solve((L, True), data.values)


def dmu_df(data: MeasurementSet, state: HyperParameterState, model: HarmonicModel,
           geometry: AnnulusGeometry = AnnulusGeometry(), order=DEFAULT_ORDER,
           jitter=DEFAULT_JITTER) -> np.ndarray:
    """Sensitivity of the area-average mean to each reading, ``S^-1 v``.

    The derivative is taken with respect to the centered readings, i.e. with
    the mean offset held fixed. A change of one raw reading also moves the
    offset, giving ``w_i - mean(w) + 1/N`` for ``w = S^-1 v``.
    """
    return _solve(data, state, model, geometry, order, jitter)[2]


def _quad_forms(data, state, model, a, b, jitter):
    """``a' (dS/dX_ic) b`` for every location ``i`` and coordinate ``c`` in (r, theta)."""
    X = data.X
    n = X.shape[0]
    dr, dt = _location_derivs(X, X, state, model)
    out = np.empty((n, 2))
    for c, D in enumerate((dr, dt)):
        # dS/dX_ic has row and column i equal to D[i]; diagonal entry doubled
        out[:, c] = a * (D @ b) + b * (D @ a)
        # relative jitter follows the mean diagonal of K
        out[:, c] += jitter * (2.0 * np.diag(D) / n) * float(a @ b)
    return out


def dmu_dX(data: MeasurementSet, state: HyperParameterState, model: HarmonicModel,
           geometry: AnnulusGeometry = AnnulusGeometry(), order=DEFAULT_ORDER,
           jitter=DEFAULT_JITTER) -> np.ndarray:
    """``(N, 2)`` derivative of the area-average mean w.r.t. ``(r_i, theta_i)``; theta per degree."""
    L, v, w, alpha = _solve(data, state, model, geometry, order, jitter)
    out = -_quad_forms(data, state, model, w, alpha, jitter)
    out[:, 0] += kernel_line_integral_dr(data, state, model, geometry, order) * alpha
    return out


def dsigma2_dX(data: MeasurementSet, state: HyperParameterState, model: HarmonicModel,
               geometry: AnnulusGeometry = AnnulusGeometry(), order=DEFAULT_ORDER,
               jitter=DEFAULT_JITTER) -> np.ndarray:
    """``(N, 2)`` derivative of the area-average variance w.r.t. ``(r_i, theta_i)``."""
    L, v, w, alpha = _solve(data, state, model, geometry, order, jitter)
    out = _quad_forms(data, state, model, w, w, jitter)
    out[:, 0] -= 2.0 * kernel_line_integral_dr(data, state, model, geometry, order) * w
    return out


# --------------------------------------------------------------------------
# placement


def _augmented(X, probes, theta_hat):
    probes = np.asarray(probes, dtype=float)
    new = np.column_stack([probes, np.full(probes.size, float(theta_hat))])
    return np.vstack([X, new]), probes.size


def _noise_var(data, state):
    noise = data.noise
    if noise is None:
        return state.sigma_m**2
    if isinstance(noise, np.ndarray):
        return float(np.mean(np.diag(noise)))
    return float(noise)


def _objective_one(data, state, probes, theta_hat, model, geometry, order, jitter, grad):
    X, m = _augmented(data.X, probes, theta_hat)
    n = X.shape[0]
    K = gram(X, X, state, model)
    K = 0.5 * (K + K.T)
    noise = data.noise_covariance(state.sigma_m) if data.noise is not None else None
    S = K + (jitter * np.trace(K) / n) * np.eye(n)
    nv = _noise_var(data, state)
    if noise is None:
        S += nv * np.eye(n)
    else:
        S[: n - m, : n - m] += noise
        S[n - m:, n - m:] += nv * np.eye(m)
    L = cholesky_jittered(S, state, jitter)
    v = kernel_line_integral(X, state, model, geometry, order)
    T = kernel_double_integral(state, model, geometry, order)
    w = cho_solve((L, True), v)
    val = T - float(v @ w)
    if not grad:
        return val, 0.0
    # every new probe sits at theta_hat; dK/dtheta_hat collects their rows
    _, D = _location_derivs(X[n - m:], X, state, model)
    g = 2.0 * float(np.sum(w[n - m:] * (D @ w)))
    g += jitter * (2.0 * float(np.trace(D[:, n - m:])) / n) * float(w @ w)
    return val, g


def placement_objective(data: MeasurementSet, states, probes, theta_hat: float,
                        model: HarmonicModel, geometry: AnnulusGeometry = AnnulusGeometry(),
                        order=DEFAULT_ORDER, jitter=DEFAULT_JITTER) -> float:
    """Area-average variance after adding a rake of ``probes`` at ``theta_hat`` degrees.

    The new probes carry no readings, only their noise; with several states the
    variance is averaged over them.
    """
    sts = as_states(states)
    return float(np.mean([_objective_one(data, s, probes, theta_hat, model, geometry, order,
                                         jitter, False)[0] for s in sts]))


def placement_objective_grad(data, states, probes, theta_hat, model, geometry=AnnulusGeometry(),
                             order=DEFAULT_ORDER, jitter=DEFAULT_JITTER):
    """``(objective, d objective / d theta_hat)``; the derivative is per degree."""
    sts = as_states(states)
    vals = np.array([_objective_one(data, s, probes, theta_hat, model, geometry, order, jitter, True)
                     for s in sts])
    return float(vals[:, 0].mean()), float(vals[:, 1].mean())


@dataclass
class PlacementResult:
    """Outcome of the rake-placement search.

    ``traces`` holds the objective history of each restart and ``minima`` the
    ``(theta, objective)`` end point of each; ``scan`` is the 1-degree
    verification sweep as an ``(360, 2)`` array.
    """

    theta_hat: float
    sigma2_after: float
    sigma2_before: float
    converged: bool
    traces: list = field(default_factory=list)
    minima: list = field(default_factory=list)
    scan: np.ndarray | None = None


def _descend(fun, theta0, max_iter, tol):
    """Backtracking descent on a periodic 1-D objective (degrees).

    Trial steps use the Barzilai-Borwein (secant) length, capped at 20 degrees.
    """
    theta = theta0 % 360.0
    f, g = fun(theta)
    trace = [f]
    move = 5.0
    for _ in range(max_iter):
        if g == 0.0 or abs(g) < tol * max(abs(f), 1e-300):
            return theta, f, trace, True
        t = move / abs(g)
        while True:
            delta = -t * g
            fc, gc = fun((theta + delta) % 360.0)
            if fc <= f - 1e-4 * t * g * g:
                break
            t *= 0.5
            if t * abs(g) < 1e-8:
                return theta, f, trace, True
        theta, f = (theta + delta) % 360.0, fc
        dg = gc - g
        g = gc
        trace.append(f)
        if abs(delta) < 1e-8:
            return theta, f, trace, True
        t_bb = delta / dg if dg * delta > 0 else 2.0 * t
        move = min(t_bb * abs(g), 20.0)
    return theta, f, trace, False


def place_rake(data: MeasurementSet, states, probes, model: HarmonicModel,
               geometry: AnnulusGeometry = AnnulusGeometry(), restarts: int = 24,
               max_iter: int = 200, tol: float = 1e-9, order=DEFAULT_ORDER,
               jitter=DEFAULT_JITTER) -> PlacementResult:
    """Find the angle of one extra rake that minimizes the area-average variance.

    Gradient descent with backtracking from ``restarts`` equally spaced angles,
    followed by a 1-degree sweep; if the sweep finds a better basin the
    descent is rerun from there.

    Parameters
    ----------
    states : HyperParameterState, PosteriorChain or sequence of states
        Several states give the draw-averaged objective.
    probes : sequence of float
        Normalized radii of the probes on the new rake.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if len(np.unique(np.mod(data.theta, 360.0))) < 1:
        raise ValueError("need at least one existing rake")
    sts = as_states(states)

    def fun(t):
        return placement_objective_grad(data, sts, probes, t, model, geometry, order, jitter)

    traces, minima = [], []
    all_conv = True
    for start in np.arange(restarts) * (360.0 / restarts):
        th, f, tr, ok = _descend(fun, start, max_iter, tol)
        traces.append(tr)
        minima.append((th, f))
        all_conv &= ok
    grid = np.arange(360.0)
    scan_vals = np.array([placement_objective(data, sts, probes, t, model, geometry, order, jitter)
                          for t in grid])
    best_th, best_f = min(minima, key=lambda p: p[1])
    i = int(np.argmin(scan_vals))
    if scan_vals[i] < best_f:
        th, f, tr, ok = _descend(fun, grid[i], max_iter, tol)
        traces.append(tr)
        minima.append((th, f))
        all_conv &= ok
        if f < best_f:
            best_th, best_f = th, f
        if scan_vals[i] < best_f:
            best_th, best_f = float(grid[i]), float(scan_vals[i])
    before = float(np.mean([_area_var(data, s, model, geometry, order, jitter) for s in sts]))
    return PlacementResult(float(best_th % 360.0), float(best_f), before, bool(all_conv),
                           traces, minima, np.column_stack([grid, scan_vals]))


def _area_var(data, state, model, geometry, order, jitter):
    L, v, w, _ = _solve(data, state, model, geometry, order, jitter)
    return kernel_double_integral(state, model, geometry, order) - float(v @ w)
