"""Probe response, group delay and stability of a photon / rotating-mirror / magnon cavity."""
from .errors import HybridCavityError, ValidationError
from .params import DerivedParams, IntensityConvention, PhysicalConfig, Ratio, derive_params, load_config
from .steady_state import SteadyState, solve_steady_state

__version__ = "0.1.0"

__all__ = [
    "DerivedParams",
    "HybridCavityError",
    "IntensityConvention",
    "PhysicalConfig",
    "Ratio",
    "SteadyState",
    "ValidationError",
    "derive_params",
    "load_config",
    "solve_steady_state",
    "__version__",
]
