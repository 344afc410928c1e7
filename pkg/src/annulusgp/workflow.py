"""End-to-end helpers: fit a chain, thin it, and run one randomized-rake trial."""
from __future__ import annotations

import numpy as np

from .core import AnnulusGeometry, HarmonicModel, MeasurementSet, PosteriorChain
from .dataio import SyntheticField, sample_field
from .posterior import PosteriorModel, PriorSpec
from .quadrature import ensemble_area_average, sector_area_average
from .sampler import SamplerConfig, sample
from .uncertainty import ensemble_decomposition

__all__ = ["fit", "select_states", "run_trial"]


def fit(data: MeasurementSet, model: HarmonicModel, prior: PriorSpec = PriorSpec(),
        config: SamplerConfig = SamplerConfig(), n_jobs: int = 1) -> list[PosteriorChain]:
    """Sample the hyperparameter posterior for ``data``."""
    target = PosteriorModel(data, model, prior)
    return sample(target, target.param.default_init(), config, n_jobs=n_jobs)


def select_states(chains, max_draws: int | None = None):
    """Up to ``max_draws`` evenly spaced states from the pooled chains."""
    if isinstance(chains, PosteriorChain):
        chains = [chains]
    pooled = PosteriorChain.merge(list(chains))
    n = len(pooled)
    if max_draws is None or max_draws >= n:
        idx = np.arange(n)
    else:
        idx = np.unique(np.linspace(0, n - 1, int(max_draws)).round().astype(int))
    return [pooled.state(int(i)) for i in idx]


def run_trial(field: SyntheticField, rakes, probes, model: HarmonicModel,
              prior: PriorSpec = PriorSpec(), config: SamplerConfig = SamplerConfig(),
              geometry: AnnulusGeometry = AnnulusGeometry(), noise_std=None, seed=0,
              max_draws: int | None = 200) -> dict:
    """Sample readings at one rake arrangement and compare the two area averages."""
    data = sample_field(field, rakes, probes, noise_std, seed)
    chains = fit(data, model, prior, config)
    states = select_states(chains, max_draws)
    area = ensemble_area_average(data, states, model, geometry)
    dec = ensemble_decomposition(data, states, model, geometry)
    return {
        "n_rakes": len(rakes),
        "rakes": " ".join(f"{t:g}" for t in rakes),
        "truth": field.true_area_average,
        "sector_mean": sector_area_average(data, geometry),
        "bayes_mean": area.mean,
        "bayes_std": area.std,
        "sigma2_measurement": dec.measurement,
        "sigma2_sampling": dec.sampling,
    }
