"""Immersed Raviart-Thomas mixed finite elements for elliptic interface problems."""
from .analysis import convergence_table, interpolation_study, l2_errors, solve_problem
from .assembly import assemble_system
from .elements import auxiliary_functions, ife_basis, ife_interpolate, rt_basis
from .exceptions import (AssumptionViolation, ConfigError, ImmersedRTError, NonConvergence,
                         NonPositiveCoefficient, SingularSystem, TopologyError)
from .geometry import build_uniform_mesh, circle, classify_mesh
from .problems import example1, example2, get_problem
from .solver import solve

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation", "ConfigError", "ImmersedRTError", "NonConvergence", "NonPositiveCoefficient",
    "SingularSystem", "TopologyError", "assemble_system", "auxiliary_functions", "build_uniform_mesh",
    "circle", "classify_mesh", "convergence_table", "example1", "example2", "get_problem", "ife_basis",
    "ife_interpolate", "interpolation_study", "l2_errors", "rt_basis", "solve", "solve_problem",
]
