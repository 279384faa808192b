"""Herd-defense predator-prey model with a prey disease: equilibria, stability and simulation."""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"

from .equilibria import EquilibriumId, EquilibriumRecord, Status, all_equilibria
from .integrate import AttractorKind, SolverOptions, Termination, Trajectory, detect_attractor, simulate
from .model import (ModelDomainError, ModelParams, ParameterDomainError, StateOriginal, StateReformed, Variant,
                    jacobian_reformed, rhs_original, rhs_reformed, to_original, to_reformed, transform_derivative)
from .stability import Classification, classify, hopf_K, transcritical_points
from .sweep import SweepSpec, refine_transition, run_sweep, transitions

__all__ = [
    "ModelParams", "Variant", "StateOriginal", "StateReformed", "ModelDomainError", "ParameterDomainError",
    "rhs_original", "rhs_reformed", "to_reformed", "to_original", "transform_derivative", "jacobian_reformed",
    "EquilibriumId", "EquilibriumRecord", "Status", "all_equilibria",
    "Classification", "classify", "hopf_K", "transcritical_points",
    "SolverOptions", "Trajectory", "Termination", "AttractorKind", "simulate", "detect_attractor",
    "SweepSpec", "run_sweep", "transitions", "refine_transition",
]
