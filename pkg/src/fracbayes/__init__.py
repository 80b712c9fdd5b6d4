"""Bayesian estimation of the fractional order of a time-fractional
advection-diffusion solution from noisy pressure data, by sampling
importance resampling."""
from .data import Dataset, GridSpec, make_grid, read_dataset, simulate_dataset, write_dataset
from .inference import CredibleInterval, credible_interval, posterior_predictive, predictive_profiles, quantile
from .model import PriorSpec, Theta, log_likelihood, log_prior, log_unnorm_posterior
from .series import SeriesConfig, SeriesNonConvergence, evaluate_pressure, evaluate_surface, log_gamma, series_factor
from .sir import PosteriorSampleSet, ProposalSpec, SirConfig, run_sir

__version__ = "0.1.0"

__all__ = [
    "CredibleInterval", "Dataset", "GridSpec", "PosteriorSampleSet", "PriorSpec", "ProposalSpec",
    "SeriesConfig", "SeriesNonConvergence", "SirConfig", "Theta", "credible_interval",
    "evaluate_pressure", "evaluate_surface", "log_gamma", "log_likelihood", "log_prior",
    "log_unnorm_posterior", "make_grid", "posterior_predictive", "predictive_profiles", "quantile",
    "read_dataset", "run_sir", "series_factor", "simulate_dataset", "write_dataset",
]
