"""Tensor polarizability of alkali D lines and Hamiltonian design for atom-light interfaces."""

from .atomic_data import HalfInteger, LevelScheme, detuning_of_transition, load_scheme, wigner6j
from .dynamics import (
    JointGaussianState,
    Scenario,
    ScenarioConfig,
    TimeSeries,
    condition_on_homodyne,
    evolve_gaussian,
    evolve_mean_field,
    run_scenario,
)
from .exceptions import DegenerateState, InvalidRange, RbTensorError, SchemeError, UnknownLevel
from .hamiltonian import (
    ClassicalVectors,
    HamiltonianCoefficients,
    check_rotation_symmetry,
    coefficients_at,
    mean_field_energy,
)
from .polarizability import (
    Condition,
    MagicDetuning,
    PolarizabilityComponents,
    asymptotic_ratio_slope,
    find_magic_detunings,
    irreducible_components,
    line_factor,
    scan,
)

__version__ = "0.1.0"

__all__ = [
    "HalfInteger",
    "LevelScheme",
    "detuning_of_transition",
    "load_scheme",
    "wigner6j",
    "JointGaussianState",
    "Scenario",
    "ScenarioConfig",
    "TimeSeries",
    "condition_on_homodyne",
    "evolve_gaussian",
    "evolve_mean_field",
    "run_scenario",
    "DegenerateState",
    "InvalidRange",
    "RbTensorError",
    "SchemeError",
    "UnknownLevel",
    "ClassicalVectors",
    "HamiltonianCoefficients",
    "check_rotation_symmetry",
    "coefficients_at",
    "mean_field_energy",
    "Condition",
    "MagicDetuning",
    "PolarizabilityComponents",
    "asymptotic_ratio_slope",
    "find_magic_detunings",
    "irreducible_components",
    "line_factor",
    "scan",
]
