"""Numerical laboratory for the parametric weighted (p,q)-Laplacian Dirichlet problem."""

from .domain import (
    DiscreteFunction,
    Mesh,
    ScalarField,
    build_mesh,
    lr_norm,
    negative_part,
    positive_part,
    sobolev_gradient_norm,
)
from .energy import EnergyGradient, FunctionalSpec, apply_operator, evaluate, truncation_rhs
from .model import NonlinearitySpec, ProblemSpec, builtin_nonlinearity, check_hypotheses
from .solve import (
    SolverParams,
    SolverReport,
    classify,
    extremal_negative,
    extremal_positive,
    minimize,
    mountain_pass_nodal,
    nonexistence_scan,
    solve_auxiliary,
)
from .spectrum import EigenPair, Path, eigen_residual, principal_eigenpair, second_eigenvalue

__version__ = "0.1.0"
