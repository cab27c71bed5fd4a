"""Finite-difference solver and estimate checker for generalized KdV on the half-line."""

from .errors import (
    ConfigurationError, DivergenceError, HalfKdVError, LinearAlgebraError, ParseError,
    PreconditionError, SetupError, ShapeError, StepError, StepFailure,
)
from .grid_ops import BandedOperator, BoundaryConditions, GridSpec, build_grid, d_op
from .model import FieldState, SolverParams, build_operators, rhs
from .timestepper import Trajectory, banded_solve, solve_ibvp, step

__version__ = "0.1.0"
