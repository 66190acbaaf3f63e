"""3DVAR filtering of the 2D periodic Navier-Stokes equation.

The forward model is a dealiased pseudo-spectral vorticity solver advanced
with ETD4RK; the filters are the discrete-time 3DVAR mean update and its
frequent-observation (split-step OU) limit.
"""
__version__ = "0.1.0"

from .errors import BlowUpError, ConfigError, MissingInputError, NsFilterError, SchemaError
from .spectral import SpectralField, WavenumberGrid, make_grid
from .dynamics import Solver, SolverParams, psi_flow
from .observations import NoiseModel, generate_observations, generate_truth, spin_up
from .discrete import assimilate, build_gain, lower_bound, upper_bound
from .continuous import ContinuousFilterParams, split_step_run
from .config import ExperimentConfig, load_config

__all__ = [
    "__version__",
    "BlowUpError",
    "ConfigError",
    "MissingInputError",
    "NsFilterError",
    "SchemaError",
    "SpectralField",
    "WavenumberGrid",
    "make_grid",
    "Solver",
    "SolverParams",
    "psi_flow",
    "NoiseModel",
    "generate_observations",
    "generate_truth",
    "spin_up",
    "assimilate",
    "build_gain",
    "lower_bound",
    "upper_bound",
    "ContinuousFilterParams",
    "split_step_run",
    "ExperimentConfig",
    "load_config",
]
