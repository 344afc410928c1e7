"""Domain types shared by every other module.

Conventions
-----------
* Angles cross every public boundary in degrees, in ``[0, 360)``.
* Radii cross every public boundary normalized to ``[0, 1]``; the physical
  radii only live inside :class:`AnnulusGeometry`.
* Measurement values are stored centered (they sum to zero); the subtracted
  mean is kept in ``MeasurementSet.mean_offset``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "AnnulusGeometry",
    "ProbeLocation",
    "MeasurementSet",
    "HarmonicModel",
    "HyperParameterState",
    "PosteriorChain",
    "NumericalError",
    "center",
    "build_grid",
    "locations_array",
    "as_states",
    "THETA_A",
    "THETA_B",
    "PROBE_RADII",
]

# Default test-case sampling locations (degrees / normalized radius).
THETA_A = (12.0, 55.0, 97.0, 170.0, 215.0, 305.0)
THETA_B = (9.0, 45.0, 97.0, 135.0, 174.0, 253.0, 337.0)
PROBE_RADII = (0.07, 0.2, 0.35, 0.5, 0.66, 0.8, 0.95)


class NumericalError(RuntimeError):
    """A factorization or integration failed in a way jitter could not fix.

    ``state`` carries the hyperparameters that triggered the failure, when
    there are any.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class AnnulusGeometry:
    """Hub and casing radii and the area weighting they induce."""

    r_inner: float = 0.5
    r_outer: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.r_inner < self.r_outer):
            raise ValueError(
                f"need 0 < r_inner < r_outer, got {self.r_inner}, {self.r_outer}"
            )

    @property
    def nu(self) -> float:
        """Normalizer so that ``nu * int int h(r) dr dtheta == 1``."""
        ri, ro = self.r_inner, self.r_outer
        return (ro - ri) / (math.pi * (ro**2 - ri**2))

    def h(self, r):
        """Physical radius at normalized radius ``r`` (affine)."""
        return np.asarray(r, dtype=float) * (self.r_outer - self.r_inner) + self.r_inner

    @property
    def dh_dr(self) -> float:
        return self.r_outer - self.r_inner


@dataclass(frozen=True, order=True)
class ProbeLocation:
    r: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.theta)):
            raise ValueError(f"non-finite probe location ({self.r}, {self.theta})")
        if not (0.0 <= self.r <= 1.0):
            raise ValueError(f"normalized radius {self.r} outside [0, 1]")
        if not (0.0 <= self.theta < 360.0):
            raise ValueError(f"angle {self.theta} outside [0, 360)")


def locations_array(locations: Sequence[ProbeLocation]) -> np.ndarray:
    """``(N, 2)`` array of ``(r, theta_deg)`` rows."""
    return np.array([[p.r, p.theta] for p in locations], dtype=float).reshape(-1, 2)


def center(readings):
    """Subtract the arithmetic mean.

    Returns
    -------
    centered : ndarray
    offset : float
        ``centered + offset`` reproduces ``readings``.
    """
    values = np.asarray(readings, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("cannot center an empty set of readings")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValueError(f"non-finite reading at index {int(bad[0])}")
    offset = float(np.mean(values))
    return values - offset, offset


def build_grid(r_values, theta_values) -> list[ProbeLocation]:
    """Tensor grid of probes, r-major: all rakes at ``r_values[0]`` first."""
    return [ProbeLocation(float(r), float(t)) for r in r_values for t in theta_values]


class MeasurementSet:
    """Probe locations, centered readings and their noise model.

    Parameters
    ----------
    locations : sequence of ProbeLocation
    values : array_like
        Raw (uncentered) readings unless ``centered=True``.
    noise : None, float or (N, N) array
        ``None`` means the noise level is a model hyperparameter (isotropic
        ``sigma_m**2 I``). A float is a fixed isotropic variance, an array a
        fixed full covariance.
    mean_offset : float
        Only used with ``centered=True``.
    """

    def __init__(self, locations, values, noise=None, *, centered=False, mean_offset=0.0):
        locations = [p if isinstance(p, ProbeLocation) else ProbeLocation(*p) for p in locations]
        if len(set(locations)) != len(locations):
            raise ValueError("duplicate probe locations")
        values = np.asarray(values, dtype=float).ravel()
        if values.size != len(locations):
            raise ValueError(f"{values.size} values for {len(locations)} locations")
        raw = values + mean_offset if centered else values.copy()
        if centered:
            scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
            if abs(values.sum()) > 1e-10 * values.size * scale:
                raise ValueError("values flagged as centered do not sum to zero")
            offset = float(mean_offset)
        else:
            values, offset = center(values)
        if noise is not None and np.ndim(noise) > 0:
            noise = np.asarray(noise, dtype=float)
            if noise.ndim == 1:
                noise = np.diag(noise)
            n = len(locations)
            if noise.shape != (n, n):
                raise ValueError(f"noise covariance shape {noise.shape}, expected {(n, n)}")
            if not np.allclose(noise, noise.T, rtol=0, atol=1e-12 * max(1.0, np.abs(noise).max())):
                raise ValueError("noise covariance is not symmetric")
            if np.any(np.diag(noise) < 0) or np.linalg.eigvalsh(noise).min() < -1e-10 * max(1.0, np.abs(noise).max()):
                raise ValueError("noise covariance is not positive semidefinite")
            noise.setflags(write=False)
        elif noise is not None:
            noise = float(noise)
            if noise < 0:
                raise ValueError("noise variance must be nonnegative")
        values.setflags(write=False)
        raw.setflags(write=False)
        self._raw = raw
        self._locations = tuple(locations)
        self._values = values
        self._offset = offset
        self._noise = noise
        X = locations_array(self._locations)
        X.setflags(write=False)
        self._X = X

    @property
    def locations(self) -> tuple[ProbeLocation, ...]:
        return self._locations

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def mean_offset(self) -> float:
        return self._offset

    @property
    def noise(self):
        return self._noise

    @property
    def X(self) -> np.ndarray:
        """``(N, 2)`` array of ``(r, theta_deg)``."""
        return self._X

    @property
    def r(self) -> np.ndarray:
        return self._X[:, 0]

    @property
    def theta(self) -> np.ndarray:
        return self._X[:, 1]

    @property
    def raw_values(self) -> np.ndarray:
        """Readings as supplied (before centering)."""
        return self._raw

    def __len__(self):
        return len(self._locations)

    def noise_covariance(self, sigma_m: float | None = None) -> np.ndarray:
        """Dense noise covariance; fixed noise wins over ``sigma_m``."""
        n = len(self)
        if isinstance(self._noise, np.ndarray):
            return np.array(self._noise)
        if self._noise is not None:
            return self._noise * np.eye(n)
        if sigma_m is None:
            raise ValueError("noise is a hyperparameter here; pass sigma_m")
        return sigma_m**2 * np.eye(n)

    def subset(self, mask) -> "MeasurementSet":
        """Re-centered measurement set restricted to ``mask`` (bool or indices)."""
        idx = np.arange(len(self))[mask]
        noise = self._noise
        if isinstance(noise, np.ndarray):
            noise = noise[np.ix_(idx, idx)]
        return MeasurementSet([self._locations[i] for i in idx], self.raw_values[idx], noise)

    def with_appended(self, locations, raw_values) -> "MeasurementSet":
        if isinstance(self._noise, np.ndarray):
            raise ValueError("cannot append to a set with a full noise covariance")
        return MeasurementSet(list(self._locations) + list(locations),
                              np.concatenate([self.raw_values, np.asarray(raw_values, float)]),
                              self._noise)

    def __repr__(self):
        return f"MeasurementSet(N={len(self)}, mean_offset={self._offset:.6g})"


@dataclass(frozen=True)
class HarmonicModel:
    """Candidate circumferential frequencies.

    Mode ordering follows the design matrix: index 0 is the constant mode,
    then ``sin(w_j t), cos(w_j t)`` for each frequency in turn.
    """

    frequencies: tuple[int, ...]

    def __post_init__(self):
        freqs = tuple(int(w) for w in self.frequencies)
        if any(float(w) != float(v) for w, v in zip(freqs, self.frequencies)):
            raise ValueError("frequencies must be integers")
        if any(w < 1 for w in freqs):
            raise ValueError("frequencies must be >= 1")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies", freqs)

    @classmethod
    def up_to(cls, kmax: int) -> "HarmonicModel":
        return cls(tuple(range(1, kmax + 1)))

    @property
    def k(self) -> int:
        return len(self.frequencies)

    @property
    def n_modes(self) -> int:
        return 2 * self.k + 1

    def mode_labels(self) -> list[str]:
        labels = ["const"]
        for w in self.frequencies:
            labels += [f"sin{w}", f"cos{w}"]
        return labels


@dataclass(frozen=True)
class HyperParameterState:
    """One point in hyperparameter space.

    ``lam`` holds the mode scales (entering the Fourier kernel squared). When
    the horseshoe latents ``c`` and ``lam_tilde`` are given, ``lam`` must be
    their regularized image; use :meth:`from_horseshoe` to build it.
    """

    lam: np.ndarray
    sigma_f: float
    lengthscale: float
    sigma_m: float
    c: float | None = None
    lam_tilde: np.ndarray | None = None
    tau: float | None = None

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float).ravel()
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("mode scales must be finite and nonnegative")
        if not (self.sigma_f > 0 and self.lengthscale > 0 and self.sigma_m >= 0):
            raise ValueError(
                f"need sigma_f > 0, l > 0, sigma_m >= 0; got "
                f"{self.sigma_f}, {self.lengthscale}, {self.sigma_m}"
            )
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "sigma_f", float(self.sigma_f))
        object.__setattr__(self, "lengthscale", float(self.lengthscale))
        object.__setattr__(self, "sigma_m", float(self.sigma_m))
        if self.lam_tilde is not None:
            lt = np.array(self.lam_tilde, dtype=float).ravel()
            if self.c is None or self.tau is None:
                raise ValueError("horseshoe latents need both c and tau")
            if lt.shape != lam.shape or np.any(lt <= 0) or self.c <= 0:
                raise ValueError("horseshoe latents must be positive and match lam")
            expected = regularized_lam2(lt, self.c, self.tau)
            if not np.allclose(lam**2, expected, rtol=1e-10, atol=0):
                raise ValueError("lam is not the regularized image of the latents")
            lt.setflags(write=False)
            object.__setattr__(self, "lam_tilde", lt)

    @classmethod
    def from_horseshoe(cls, lam_tilde, c, tau, sigma_f, lengthscale, sigma_m):
        lt = np.asarray(lam_tilde, dtype=float)
        lam = np.sqrt(regularized_lam2(lt, c, tau))
        return cls(lam, sigma_f, lengthscale, sigma_m, c=float(c), lam_tilde=lt, tau=float(tau))

    @property
    def lam2(self) -> np.ndarray:
        return self.lam**2


def regularized_lam2(lam_tilde, c, tau):
    """Regularized-horseshoe mode variance ``c tau^2 lt^2 / (c + tau^2 lt^2)``.

    Bounded above by both ``c`` (slab) and ``tau^2 lt^2`` (horseshoe).
    """
    t2l2 = tau**2 * np.asarray(lam_tilde, dtype=float) ** 2
    return c * t2l2 / (c + t2l2)


@dataclass
class PosteriorChain:
    """Kept MCMC draws in constrained space.

    ``values`` is ``(n_draws, n_params)`` with columns named by
    ``param_names``; ``draws`` rebuilds the :class:`HyperParameterState`
    for each row.
    """

    param_names: list[str]
    values: np.ndarray
    log_density: np.ndarray
    n_modes: int
    chain_id: int = 0
    seed: int | None = None
    step_size: float = float("nan")
    divergent: np.ndarray | None = None
    tree_depth: np.ndarray | None = None
    prior_variant: str = "simple"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.log_density = np.asarray(self.log_density, dtype=float).ravel()
        if self.values.shape[0] == 0:
            raise ValueError("chain has no draws")
        if self.values.shape[1] != len(self.param_names):
            raise ValueError("column count does not match parameter names")
        if self.log_density.size != self.values.shape[0]:
            raise ValueError("one log-density per draw required")
        if self.divergent is None:
            self.divergent = np.zeros(self.values.shape[0], dtype=bool)
        self._draws = None

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_divergent(self) -> int:
        return int(np.sum(self.divergent))

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.param_names.index(name)]

    def lam_matrix(self) -> np.ndarray:
        """``(n_draws, n_modes)`` mode scales."""
        return self.values[:, : self.n_modes]

    @property
    def draws(self) -> list[HyperParameterState]:
        if self._draws is None:
            self._draws = [self.state(i) for i in range(len(self))]
        return self._draws

    def state(self, i: int) -> HyperParameterState:
        row = self.values[i]
        m = self.n_modes
        names = self.param_names
        get = lambda n: row[names.index(n)]  # noqa: E731
        if self.prior_variant == "horseshoe":
            return HyperParameterState(
                row[:m], get("sigma_f"), get("lengthscale"), get("sigma_m"),
                c=get("c"), lam_tilde=np.array([get(f"lam_tilde_{j}") for j in range(m)]),
                tau=get("tau"),
            )
        return HyperParameterState(row[:m], get("sigma_f"), get("lengthscale"), get("sigma_m"))

    def thin(self, every: int) -> "PosteriorChain":
        sl = slice(None, None, every)
        return PosteriorChain(
            list(self.param_names), self.values[sl], self.log_density[sl], self.n_modes,
            self.chain_id, self.seed, self.step_size, self.divergent[sl],
            None if self.tree_depth is None else self.tree_depth[sl],
            self.prior_variant, dict(self.meta),
        )

    @staticmethod
    def merge(chains: Sequence["PosteriorChain"]) -> "PosteriorChain":
        """Concatenate chains (read-only reduction over independent chains)."""
        first = chains[0]
        return PosteriorChain(
            list(first.param_names),
            np.vstack([c.values for c in chains]),
            np.concatenate([c.log_density for c in chains]),
            first.n_modes, -1, first.seed, float("nan"),
            np.concatenate([c.divergent for c in chains]),
            None, first.prior_variant, dict(first.meta),
        )


def as_states(chain) -> list[HyperParameterState]:
    """States of a chain, a single state, or a sequence of states."""
    if isinstance(chain, HyperParameterState):
        return [chain]
    if isinstance(chain, PosteriorChain):
        return chain.draws
    return list(chain)
