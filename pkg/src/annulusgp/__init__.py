"""Gaussian-process reconstruction of annular rake measurements.

Fourier x squared-exponential product kernel, NUTS over the kernel
hyperparameters, Bayesian area averages with an uncertainty split, and
sensitivity-driven rake placement.
"""
from ._backend import NAME as BACKEND
from .core import (
    PROBE_RADII,
    THETA_A,
    THETA_B,
    AnnulusGeometry,
    HarmonicModel,
    HyperParameterState,
    MeasurementSet,
    NumericalError,
    PosteriorChain,
    ProbeLocation,
    build_grid,
    center,
)
from .dataio import (
    SelectionTable,
    SyntheticFieldSpec,
    generate_field,
    ingest,
    sample_field,
    tabulate_selection,
    write_measurements,
)
from .design import PlacementResult, dmu_df, dmu_dX, dsigma2_dX, place_rake
from .kernels import fourier_design_matrix, fourier_kernel, gram, squared_exp_kernel
from .posterior import PosteriorModel, PredictiveGaussian, PriorSpec, ensemble_predict, predict
from .quadrature import (
    AreaAverage,
    area_average,
    ensemble_area_average,
    sector_area_average,
)
from .sampler import SamplerConfig, diagnose, sample
from .uncertainty import Decomposition, area_decomposition, ensemble_decomposition, field_decomposition
from .workflow import fit

__version__ = "0.1.0"
