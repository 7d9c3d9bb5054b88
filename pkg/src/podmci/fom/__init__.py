"""Full-order multigroup diffusion model with delayed neutrons and feedback."""

from .eigen import average_power_density, normalize_to_average_power, solve_k_eigenvalue
from .kinetics import (
    KineticsState,
    TransientConfig,
    precursor_update,
    run_transient,
    tbdf2_step,
    temperature_update,
)
from .problems import PROBLEMS, LraProblem, SphereProblem, get_problem, initial_condition_parabolic
from .record import SimulationRecord
from .system import DiscreteSystem, assemble_operator, face_diffusion_coefficient

__all__ = [
    "DiscreteSystem",
    "assemble_operator",
    "face_diffusion_coefficient",
    "solve_k_eigenvalue",
    "normalize_to_average_power",
    "average_power_density",
    "KineticsState",
    "TransientConfig",
    "precursor_update",
    "temperature_update",
    "tbdf2_step",
    "run_transient",
    "initial_condition_parabolic",
    "SphereProblem",
    "LraProblem",
    "PROBLEMS",
    "get_problem",
    "SimulationRecord",
]
