"""Spectral-Galerkin simulator for a fractional Cahn-Hilliard tumor-growth system."""
from .config import RunConfig, parse_config, parse_config_text
from .potentials import Proliferation, YosidaParams, make_potential
from .spectral import ConfigurationError, GridSpec, SpectralOperator, build_operator
from .stepper import Forcing, Problem, Scheme, SimConfig, SimState, StepFailure, make_operators
from .trajectory import Trajectory

__all__ = ["ConfigurationError", "Forcing", "GridSpec", "Problem", "Proliferation", "RunConfig",
           "Scheme", "SimConfig", "SimState", "SpectralOperator", "StepFailure", "Trajectory",
           "YosidaParams", "build_operator", "make_operators", "make_potential", "parse_config",
           "parse_config_text"]
