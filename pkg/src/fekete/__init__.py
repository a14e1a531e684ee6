"""Approximate Fekete point sets for kernel interpolation.

Candidate points are selected by solving a D-optimal experimental design
relaxation as a second-order cone program and keeping the local maxima of the
optimal weights; a classical power-function greedy method is included for
comparison.
"""

from .errors import (
    CapacityError,
    ConditioningError,
    FeketeError,
    NumericsError,
    SolverFailure,
)
from .kernels import MercerKernel, brownian_kernel, gaussian_kernel, regressor, spherical_imq_kernel
from .geometry import CandidateSet, interval_candidates, lattice_candidates, sphere_candidates
from .design import (
    DesignProblem,
    Weights,
    fekete_bruteforce,
    information_matrix,
    logdet_objective,
    multiplicative_solver,
    truncated_gram_det,
)
from .socp_builder import (
    ConicProgram,
    VariableLayout,
    add_pinned_weights,
    build_layout,
    build_program,
    extract_weights,
    geometric_mean_program,
    program_from_debug_json,
    program_to_debug_json,
    scale_constant,
)
from .conic_solver import (
    Residuals,
    SolverOptions,
    SolverResult,
    Violation,
    solve,
    solve_external,
    verify,
)
from .interpolation import (
    KernelSystem,
    PointSet,
    condition_number,
    determinant_ratio_power,
    interpolate,
    kernel_system,
    max_power_over,
    p_greedy,
    power_function,
)
from .selection import SelectionResult, algorithm1, algorithm2, local_maxima

__version__ = "0.1.0"

__all__ = [
    "FeketeError",
    "CapacityError",
    "ConditioningError",
    "NumericsError",
    "SolverFailure",
    "MercerKernel",
    "brownian_kernel",
    "spherical_imq_kernel",
    "gaussian_kernel",
    "regressor",
    "CandidateSet",
    "interval_candidates",
    "sphere_candidates",
    "lattice_candidates",
    "DesignProblem",
    "Weights",
    "information_matrix",
    "logdet_objective",
    "truncated_gram_det",
    "fekete_bruteforce",
    "multiplicative_solver",
    "VariableLayout",
    "ConicProgram",
    "build_layout",
    "build_program",
    "add_pinned_weights",
    "extract_weights",
    "geometric_mean_program",
    "program_to_debug_json",
    "program_from_debug_json",
    "scale_constant",
    "SolverOptions",
    "SolverResult",
    "Residuals",
    "Violation",
    "solve",
    "solve_external",
    "verify",
    "PointSet",
    "KernelSystem",
    "kernel_system",
    "interpolate",
    "power_function",
    "determinant_ratio_power",
    "max_power_over",
    "p_greedy",
    "condition_number",
    "SelectionResult",
    "local_maxima",
    "algorithm1",
    "algorithm2",
    "__version__",
]
