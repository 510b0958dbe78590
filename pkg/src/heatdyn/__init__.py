"""Direct and inverse solvers for the heat equation on [0, 1] with a
dynamic (eigenparameter-dependent) boundary condition at x = 1."""

__version__ = "0.1.0"

from .direct import DirectProblem, DirectSolver, SolutionField, solve_direct
from .errors import (
    AssumptionViolation,
    HeatDynError,
    InputError,
    NumericalFailure,
)
from .expansion import SampledFunction, coefficients, reconstruct
from .fdm import FdmScheme, solve_fdm
from .inverse import InverseProblem, solve_inverse, stability_experiment
from .spectral import ModeBasis, SpectralConfig, compute_modes

__all__ = [
    "AssumptionViolation",
    "DirectProblem",
    "DirectSolver",
    "FdmScheme",
    "HeatDynError",
    "InputError",
    "InverseProblem",
    "ModeBasis",
    "NumericalFailure",
    "SampledFunction",
    "SolutionField",
    "SpectralConfig",
    "coefficients",
    "compute_modes",
    "reconstruct",
    "solve_direct",
    "solve_fdm",
    "solve_inverse",
    "stability_experiment",
]
