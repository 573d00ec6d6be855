"""Spectral Galerkin solver and estimate checker for the 2-D energy equation
with mixed nonhomogeneous boundary conditions on a rectangle."""

__version__ = "0.1.0"

from .eigenbasis import EigenBasis, EigenPair, build_basis, fd_eigen_oracle, project
from .errors import (BlowupError, ConfigError, DegenerateScalingError, DomainError,
                     NumericalError, ShapeError)
from .estimates import (EstimateLedger, SweepReport, gronwall_envelope, record_step,
                        regularity_report, sweep)
from .galerkin import (GalerkinState, Problem, SolverConfig, Trajectory, assemble_convection,
                       initial_coefficients, run, single_mode, smooth_bump, step)
from .geometry import Domain, QuadratureGrid, classify_boundary, inner_l2, lp_norm
from .lifting import (LiftingField, PhysicalParams, fd_lifting_oracle, gradient_lp_norms,
                      homogenize, nondimensionalize, redimensionalize, solve_lifting)
from .velocity import (Forcing, VelocityField, build_forcing, make_velocity, read_velocity_csv,
                       validate_velocity)

__all__ = [
    "BlowupError", "ConfigError", "DegenerateScalingError", "Domain", "DomainError",
    "EigenBasis", "EigenPair", "EstimateLedger", "Forcing", "GalerkinState", "LiftingField",
    "NumericalError", "PhysicalParams", "Problem", "QuadratureGrid", "ShapeError",
    "SolverConfig", "SweepReport", "Trajectory", "VelocityField", "assemble_convection",
    "build_basis", "build_forcing", "classify_boundary", "fd_eigen_oracle", "fd_lifting_oracle",
    "gradient_lp_norms", "gronwall_envelope", "homogenize", "initial_coefficients", "inner_l2", "lp_norm",
    "make_velocity", "nondimensionalize", "project", "read_velocity_csv", "record_step",
    "redimensionalize", "regularity_report", "run", "single_mode", "smooth_bump",
    "solve_lifting", "step", "sweep", "validate_velocity",
]
