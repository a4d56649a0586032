"""Projection filtering and smoothing on the sphere with von Mises-Fisher
densities, plus a Gaussian baseline and a Monte Carlo harness."""
from .dynamics import OuParams, Scenario, ScenarioConfig, simulate_batch, simulate_scenario
from .experiment import ExperimentConfig, run_monte_carlo, write_outputs
from .gaussian import GaussianBelief, run_gaussian_filter, run_gaussian_smoother
from .projection import run_vmf_filter, run_vmf_smoother
from .vmf import MeasurementModel

__all__ = [
    "ExperimentConfig",
    "GaussianBelief",
    "MeasurementModel",
    "OuParams",
    "Scenario",
    "ScenarioConfig",
    "run_gaussian_filter",
    "run_gaussian_smoother",
    "run_monte_carlo",
    "run_vmf_filter",
    "run_vmf_smoother",
    "simulate_batch",
    "simulate_scenario",
    "write_outputs",
]
