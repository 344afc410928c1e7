"""No-U-Turn Hamiltonian Monte Carlo and convergence diagnostics.

The transition is the multinomial variant of NUTS: trajectories are doubled
forwards or backwards in time until the endpoints start to turn back on each
other, and the next state is drawn from the whole trajectory with weights
``exp(-H)``, with progressive sampling biased towards the newest subtree.

Warmup adapts the step size by dual averaging towards a target mean
acceptance statistic, and a diagonal inverse mass matrix from the draw
variances in doubling windows (initial fast buffer, slow windows, terminal
fast buffer). Warmup draws are discarded unless ``keep_warmup`` is set.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_toeplitz

from .core import PosteriorChain

__all__ = [
    "SamplerConfig",
    "SamplerError",
    "Diagnostics",
    "sample",
    "gelman_rubin",
    "geweke",
    "autocorr",
    "effective_sample_size",
    "diagnose",
    "write_chains",
    "read_chains",
]

_MAX_DELTA_H = 1000.0


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    tune: int = 500
    draws: int = 1000
    target_accept: float = 0.9
    max_tree_depth: int = 10
    seed: int = 0
    keep_warmup: bool = False
    init_spread: float = 1.0
    metric: str = "diag"

    def __post_init__(self):
        if self.chains < 1 or self.draws < 1 or self.tune < 0:
            raise ValueError("need chains >= 1, draws >= 1, tune >= 0")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.max_tree_depth < 1:
            raise ValueError("max_tree_depth must be >= 1")
        if self.metric not in ("diag", "dense"):
            raise ValueError("metric must be 'diag' or 'dense'")


class _DualAveraging:
    """Nesterov dual averaging of ``log(step)`` (gamma=0.05, t0=10, kappa=0.75)."""

    def __init__(self, step, target):
        self.target = target
        self.restart(step)

    def restart(self, step):
        self.mu = math.log(10.0 * step)
        self.h_bar = 0.0
        self.log_step_bar = 0.0
        self.t = 0

    def update(self, accept_stat):
        self.t += 1
        t = self.t
        eta = 1.0 / (t + 10.0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_stat)
        log_step = self.mu - math.sqrt(t) / 0.05 * self.h_bar
        w = t ** -0.75
        self.log_step_bar = w * log_step + (1.0 - w) * self.log_step_bar
        return math.exp(log_step)

    @property
    def final_step(self):
        return math.exp(self.log_step_bar)


def _adaptation_windows(n_tune):
    """End indices of the slow mass-matrix windows (Stan-style schedule)."""
    if n_tune < 20:
        return []
    if n_tune >= 150:
        init, term, base = 75, 50, 25
    else:
        init, term = int(0.15 * n_tune), int(0.1 * n_tune)
        base = n_tune - init - term
    ends = []
    start = init
    size = base
    last = n_tune - term
    while start < last:
        end = start + size
        if end + 2 * size > last:
            end = last
        ends.append(end)
        start = end
        size *= 2
    return [(init if i == 0 else ends[i - 1], e) for i, e in enumerate(ends)]


class _Tree:
    __slots__ = ("q_minus", "p_minus", "g_minus", "q_plus", "p_plus", "g_plus",
                 "q_prop", "lp_prop", "g_prop", "log_w", "turning", "diverging",
                 "sum_accept", "n_leapfrog")


class _Metric:
    """Euclidean metric given by the inverse mass matrix (a vector when diagonal)."""

    def __init__(self, inv_mass):
        self.inv_mass = np.asarray(inv_mass, dtype=float)
        self.dense = self.inv_mass.ndim == 2
        if self.dense:
            # p ~ N(0, M) with M = inv_mass^-1
            self._chol_m = np.linalg.cholesky(np.linalg.inv(self.inv_mass))
        else:
            self._sqrt_m = 1.0 / np.sqrt(self.inv_mass)

    def velocity(self, p):
        return self.inv_mass @ p if self.dense else self.inv_mass * p

    def kinetic(self, p):
        return 0.5 * float(np.dot(p, self.velocity(p)))

    def draw(self, rng, dim):
        z = rng.standard_normal(dim)
        return self._chol_m @ z if self.dense else z * self._sqrt_m


class _NUTS:
    def __init__(self, target, inv_mass, rng, max_depth):
        self.target = target
        self.metric = _Metric(inv_mass)
        self.rng = rng
        self.max_depth = max_depth

    @property
    def inv_mass(self):
        return self.metric.inv_mass

    @inv_mass.setter
    def inv_mass(self, value):
        self.metric = _Metric(value)

    def _kinetic(self, p):
        return self.metric.kinetic(p)

    def _leapfrog(self, q, p, g, eps):
        p = p + 0.5 * eps * g
        q = q + eps * self.metric.velocity(p)
        lp, g = self.target(q)
        p = p + 0.5 * eps * g
        return q, p, lp, g

    def _uturn(self, q_minus, q_plus, p_minus, p_plus):
        dq = q_plus - q_minus
        v = self.metric.velocity
        return (np.dot(dq, v(p_minus)) < 0.0) or (np.dot(dq, v(p_plus)) < 0.0)

    def _build(self, q, p, g, direction, depth, eps, H0):
        if depth == 0:
            q1, p1, lp1, g1 = self._leapfrog(q, p, g, direction * eps)
            H = -lp1 + self._kinetic(p1) if math.isfinite(lp1) else math.inf
            if not math.isfinite(H):
                H = math.inf
            dH = H - H0
            t = _Tree()
            t.q_minus = t.q_plus = t.q_prop = q1
            t.p_minus = t.p_plus = p1
            t.g_minus = t.g_plus = t.g_prop = g1
            t.lp_prop = lp1
            t.log_w = -dH if math.isfinite(dH) else -math.inf
            t.turning = False
            t.diverging = not (dH <= _MAX_DELTA_H)
            t.sum_accept = math.exp(min(0.0, -dH)) if math.isfinite(dH) else 0.0
            t.n_leapfrog = 1
            return t
        t1 = self._build(q, p, g, direction, depth - 1, eps, H0)
        if t1.turning or t1.diverging:
            return t1
        if direction > 0:
            t2 = self._build(t1.q_plus, t1.p_plus, t1.g_plus, direction, depth - 1, eps, H0)
        else:
            t2 = self._build(t1.q_minus, t1.p_minus, t1.g_minus, direction, depth - 1, eps, H0)
        log_w = np.logaddexp(t1.log_w, t2.log_w)
        if math.isfinite(log_w) and self.rng.random() < math.exp(t2.log_w - log_w):
            t1.q_prop, t1.lp_prop, t1.g_prop = t2.q_prop, t2.lp_prop, t2.g_prop
        if direction > 0:
            t1.q_plus, t1.p_plus, t1.g_plus = t2.q_plus, t2.p_plus, t2.g_plus
        else:
            t1.q_minus, t1.p_minus, t1.g_minus = t2.q_minus, t2.p_minus, t2.g_minus
        t1.log_w = log_w
        t1.sum_accept += t2.sum_accept
        t1.n_leapfrog += t2.n_leapfrog
        t1.diverging = t2.diverging
        t1.turning = t2.turning or self._uturn(t1.q_minus, t1.q_plus, t1.p_minus, t1.p_plus)
        return t1

    def transition(self, q, lp, g, eps):
        p0 = self.metric.draw(self.rng, q.size)
        H0 = -lp + self._kinetic(p0)
        q_minus = q_plus = q
        p_minus = p_plus = p0
        g_minus = g_plus = g
        q_new, lp_new, g_new = q, lp, g
        log_w = 0.0
        sum_accept = 0.0
        n_leapfrog = 0
        diverging = False
        depth = 0
        while depth < self.max_depth:
            direction = 1 if self.rng.random() < 0.5 else -1
            if direction > 0:
                t = self._build(q_plus, p_plus, g_plus, 1, depth, eps, H0)
                q_plus, p_plus, g_plus = t.q_plus, t.p_plus, t.g_plus
            else:
                t = self._build(q_minus, p_minus, g_minus, -1, depth, eps, H0)
                q_minus, p_minus, g_minus = t.q_minus, t.p_minus, t.g_minus
            sum_accept += t.sum_accept
            n_leapfrog += t.n_leapfrog
            depth += 1
            if t.diverging:
                diverging = True
                break
            if t.turning:
                break
            if math.isfinite(t.log_w) and self.rng.random() < math.exp(min(0.0, t.log_w - log_w)):
                q_new, lp_new, g_new = t.q_prop, t.lp_prop, t.g_prop
            log_w = np.logaddexp(log_w, t.log_w)
            if self._uturn(q_minus, q_plus, p_minus, p_plus):
                break
        accept = sum_accept / max(n_leapfrog, 1)
        return q_new, lp_new, g_new, accept, diverging, depth


def _initial_step(target, q, lp, g, inv_mass, rng):
    """Double or halve the step until one leapfrog accepts about half the time."""
    eps = 1.0
    metric = _Metric(inv_mass)
    p = metric.draw(rng, q.size)

    def log_ratio(e):
        p1 = p + 0.5 * e * g
        q1 = q + e * metric.velocity(p1)
        lp1, g1 = target(q1)
        if not math.isfinite(lp1):
            return -math.inf
        p1 = p1 + 0.5 * e * g1
        return (lp1 - metric.kinetic(p1)) - (lp - metric.kinetic(p))

    lr = log_ratio(eps)
    direction = 1.0 if lr > math.log(0.5) else -1.0
    for _ in range(60):
        if direction > 0 and not lr > math.log(0.5):
            break
        if direction < 0 and not lr < math.log(0.5):
            break
        eps = eps * 2.0 ** direction
        lr = log_ratio(eps)
    return eps


def _run_chain(target, init, config: SamplerConfig, chain_id, names, row_map, n_modes,
               prior_variant):
    rng = np.random.default_rng([config.seed, chain_id])
    dim = init.size
    q = None
    for _ in range(100):
        cand = init + rng.uniform(-config.init_spread, config.init_spread, dim)
        lp, g = target(cand)
        if math.isfinite(lp) and np.all(np.isfinite(g)):
            q = cand
            break
    if q is None:
        lp, g = target(init)
        if not math.isfinite(lp):
            raise SamplerError("log density is not finite at the initial point")
        q = np.array(init, dtype=float)

    inv_mass = np.ones(dim)
    eps = _initial_step(target, q, lp, g, inv_mass, rng)
    da = _DualAveraging(eps, config.target_accept)
    windows = _adaptation_windows(config.tune)
    window_draws = []
    nuts = _NUTS(target, inv_mass, rng, config.max_tree_depth)

    n_total = config.tune + config.draws
    kept_q, kept_lp, kept_div, kept_depth = [], [], [], []
    tune_div = 0
    for it in range(n_total):
        tuning = it < config.tune
        q, lp, g, accept, div, depth = nuts.transition(q, lp, g, eps)
        if tuning:
            tune_div += int(div)
            eps = da.update(accept)
            if windows and any(a <= it < b for a, b in windows):
                window_draws.append(q.copy())
            if windows and any(it == b - 1 for _, b in windows):
                arr = np.asarray(window_draws)
                n = arr.shape[0]
                shrink = 1e-3 * (5.0 / (n + 5.0))
                if config.metric == "dense" and n > 1:
                    inv_mass = (n / (n + 5.0)) * np.cov(arr, rowvar=False) + shrink * np.eye(dim)
                else:
                    var = arr.var(axis=0, ddof=1) if n > 1 else np.ones(dim)
                    inv_mass = (n / (n + 5.0)) * var + shrink
                nuts.inv_mass = inv_mass
                window_draws = []
                eps = _initial_step(target, q, lp, g, inv_mass, rng)
                da.restart(eps)
            if it == config.tune - 1:
                eps = da.final_step
        if (not tuning) or config.keep_warmup:
            kept_q.append(q.copy())
            kept_lp.append(lp)
            kept_div.append(div)
            kept_depth.append(depth)
    if config.tune >= 20 and tune_div > 0.25 * config.tune:
        raise SamplerError(
            f"chain {chain_id}: {tune_div} of {config.tune} warmup transitions diverged; "
            "raise target_accept (smaller steps) or reparameterize")
    values = np.array([row_map(x) for x in kept_q])
    return PosteriorChain(
        list(names), values, np.array(kept_lp), n_modes, chain_id, config.seed,
        float(eps), np.array(kept_div, dtype=bool), np.array(kept_depth), prior_variant,
        {"inv_mass": inv_mass.tolist(), "tune_divergences": tune_div,
         "unconstrained": np.array(kept_q)},
    )


def sample(target: Callable, init, config: SamplerConfig = SamplerConfig(), n_jobs: int = 1
           ) -> list[PosteriorChain]:
    """Draw ``config.chains`` independent chains from ``target``.

    Parameters
    ----------
    target : callable
        ``u -> (log density, gradient)`` on an unconstrained vector. If it has
        a ``param`` attribute (as :class:`~annulusgp.posterior.PosteriorModel`
        does), draws are mapped back to the constrained hyperparameters.
    init : array_like
        Centre of the random initialisation box.
    n_jobs : int
        Worker processes; chains are identical whatever the value.
    """
    init = np.asarray(init, dtype=float)
    param = getattr(target, "param", None)
    if param is not None:
        names = param.constrained_names
        row_map = param.constrained_row
        n_modes = param.m
        variant = param.spec.variant
    else:
        names = [f"x{i}" for i in range(init.size)]
        row_map = _identity
        n_modes = 0
        variant = "none"
    lp0, _ = target(init)
    if not math.isfinite(lp0):
        raise SamplerError("log density is not finite at the initial point")
    args = [(target, init, config, c, names, row_map, n_modes, variant) for c in range(config.chains)]
    if n_jobs > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=min(n_jobs, config.chains)) as ex:
            return list(ex.map(_run_chain_star, args))
    return [_run_chain(*a) for a in args]


def _identity(x):
    return np.array(x, dtype=float)


def _run_chain_star(args):
    return _run_chain(*args)


# --------------------------------------------------------------------------
# diagnostics


def _as_chain_matrix(chains, parameter=None):
    if parameter is None:
        arr = np.atleast_2d(np.asarray(chains, dtype=float))
    else:
        arr = np.array([c.column(parameter) if isinstance(parameter, str) else c.values[:, parameter]
                        for c in chains])
    n = min(len(a) for a in arr)
    return np.array([a[:n] for a in arr], dtype=float)


def gelman_rubin(chains, parameter=None) -> float:
    """Split potential scale reduction factor.

    ``chains`` is a list of :class:`PosteriorChain` (then ``parameter`` names
    a column) or an ``(m, n)`` array.
    """
    x = _as_chain_matrix(chains, parameter)
    half = x.shape[1] // 2
    if half < 2:
        raise ValueError("need at least 4 draws per chain")
    x = np.vstack([x[:, :half], x[:, -half:]])
    m, n = x.shape
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if W <= 0.0:
        return 1.0 if B <= 0.0 else math.inf
    var_plus = (n - 1.0) / n * W + B / n
    return float(math.sqrt(var_plus / W))


def autocorr(chain, parameter=None, max_lag=None) -> np.ndarray:
    """Normalized autocorrelation at lags ``0..max_lag`` (FFT based)."""
    if isinstance(chain, PosteriorChain):
        x = chain.column(parameter) if isinstance(parameter, str) else chain.values[:, parameter]
    else:
        x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if max_lag is None:
        max_lag = n - 1
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[:n]
    if acov[0] <= 0.0:
        out = np.zeros(max_lag + 1)
        out[0] = 1.0
        return out
    return acov[: max_lag + 1] / acov[0]


def _autocov(x):
    n = x.size
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    return np.fft.irfft(spec * np.conj(spec), nfft)[:n] / n


def effective_sample_size(chains, parameter=None) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence, capped at the draw count."""
    x = _as_chain_matrix(chains, parameter)
    m, n = x.shape
    if n < 4:
        return float(m * n)
    acov = np.array([_autocov(c) for c in x])
    chain_var = acov[:, 0] * n / (n - 1.0)
    W = chain_var.mean()
    var_plus = W * (n - 1.0) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus <= 0.0:
        return float(m * n)
    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # pair sums, truncated at the first negative pair, made monotone
    total = 0.0
    prev = math.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0.0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
        t += 2
    tau = -1.0 + 2.0 * total
    tau = max(tau, 1.0 / math.log10(m * n)) if m * n > 10 else max(tau, 1e-12)
    return float(min(m * n / tau, m * n))


def _spectral_variance_of_mean(x):
    """Variance of the mean from an autoregressive spectral density at zero.

    The AR order is chosen by AIC among ``0 .. 10 log10(n)`` with Yule-Walker
    fits, so ``S(0) = s2 / (1 - sum(phi))^2``.
    """
    n = x.size
    g = _autocov(x)
    if g[0] <= 0.0:
        return 0.0
    best_aic, best = n * math.log(g[0]), (g[0], 0.0)
    for p in range(1, min(int(10 * math.log10(n)), n // 3) + 1):
        phi = solve_toeplitz(g[:p], g[1:p + 1])
        s2 = g[0] - float(phi @ g[1:p + 1])
        if not s2 > 0.0:
            break
        aic = n * math.log(s2) + 2 * p
        if aic < best_aic:
            best_aic, best = aic, (s2, float(phi.sum()))
    s2, phi_sum = best
    return s2 / max(1.0 - phi_sum, 1e-8) ** 2 / n


def geweke(chain, parameter=None, first=0.1, last=0.5) -> float:
    """Geweke z-score comparing the first and last segments of one chain."""
    if isinstance(chain, PosteriorChain):
        x = chain.column(parameter) if isinstance(parameter, str) else chain.values[:, parameter]
    else:
        x = np.asarray(chain, dtype=float).ravel()
    if not (0 < first < 1 and 0 < last < 1 and first + last <= 1):
        raise ValueError("segment fractions must be in (0, 1) and not overlap")
    n = x.size
    a = x[: max(int(first * n), 2)]
    b = x[n - max(int(last * n), 2):]
    va = _spectral_variance_of_mean(a)
    vb = _spectral_variance_of_mean(b)
    denom = va + vb
    diff = a.mean() - b.mean()
    scale = max(abs(a.mean()), abs(b.mean()), 1.0)
    if denom <= (1e-14 * scale) ** 2:
        return 0.0 if abs(diff) <= 1e-12 * scale else math.copysign(math.inf, diff)
    return float(diff / math.sqrt(denom))


@dataclass
class Diagnostics:
    parameters: list[str]
    rhat: dict[str, float]
    ess: dict[str, float]
    geweke: dict[str, list[float]]
    autocorr: dict[str, list[float]]
    divergences: list[int]
    step_sizes: list[float] = field(default_factory=list)

    def max_rhat(self) -> float:
        return max(self.rhat.values())

    def geweke_fraction_within(self, bound=2.0) -> float:
        z = [abs(v) for vals in self.geweke.values() for v in vals]
        return float(np.mean([v <= bound for v in z])) if z else 1.0

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def diagnose(chains: Sequence[PosteriorChain], parameters=None, max_lag=20) -> Diagnostics:
    """R-hat, ESS, Geweke z and autocorrelations for every (or the given) parameter.

    Parameters that are constant across all draws (e.g. a fixed ``tau``)
    are skipped.
    """
    names = parameters or chains[0].param_names
    names = [n for n in names if np.ptp(np.concatenate([c.column(n) for c in chains])) > 0]
    rhat, ess, gz, ac = {}, {}, {}, {}
    for name in names:
        rhat[name] = gelman_rubin(chains, name) if len(chains[0]) >= 4 else math.nan
        ess[name] = effective_sample_size(chains, name)
        gz[name] = [geweke(c, name) for c in chains]
        ac[name] = autocorr(np.concatenate([c.column(name) for c in chains[:1]]),
                            max_lag=min(max_lag, len(chains[0]) - 1)).tolist()
    return Diagnostics(list(names), rhat, ess, gz, ac,
                       [c.n_divergent for c in chains], [c.step_size for c in chains])


# --------------------------------------------------------------------------
# serialization


def write_chains(chains: Sequence[PosteriorChain], out_dir, diagnostics: Diagnostics | None = None):
    """One CSV per chain plus a JSON sidecar with run metadata and diagnostics."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for c in chains:
        path = out / f"chain_{c.chain_id}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(c.param_names) + ["log_density", "divergent"])
            for row, lp, dv in zip(c.values, c.log_density, c.divergent):
                w.writerow([repr(float(v)) for v in row] + [repr(float(lp)), int(dv)])
        paths.append(path)
    side = {
        "chains": [
            {"chain_id": c.chain_id, "file": f"chain_{c.chain_id}.csv", "seed": c.seed,
             "step_size": c.step_size, "n_draws": len(c), "n_divergent": c.n_divergent,
             "n_modes": c.n_modes, "prior_variant": c.prior_variant,
             "meta": {k: v for k, v in c.meta.items() if k != "unconstrained"}}
            for c in chains
        ],
    }
    if diagnostics is not None:
        side["diagnostics"] = diagnostics.to_dict()
    with open(out / "chains.json", "w") as fh:
        json.dump(_jsonable(side), fh, indent=2)
    return paths


def read_chains(chain_dir) -> list[PosteriorChain]:
    """Inverse of :func:`write_chains`."""
    d = Path(chain_dir)
    side_path = d / "chains.json"
    if not side_path.exists():
        raise FileNotFoundError(f"no chain sidecar at {side_path}")
    with open(side_path) as fh:
        side = json.load(fh)
    chains = []
    for info in side["chains"]:
        path = d / info["file"]
        if not path.exists():
            raise FileNotFoundError(f"missing chain file {path}")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        arr = np.array([[float(v) for v in r] for r in body])
        chains.append(PosteriorChain(
            header[:-2], arr[:, :-2], arr[:, -2], info["n_modes"], info["chain_id"],
            info.get("seed"), float(info["step_size"]), arr[:, -1].astype(bool), None,
            info.get("prior_variant", "simple"), dict(info.get("meta", {})),
        ))
    return chains


def default_n_jobs(threads):
    return max(1, min(int(threads), os.cpu_count() or 1))
