"""Second boundary value problem for the special Lagrangian curvature potential equation.

Solves ``sum_i arctan(kappa_i) = c`` in a planar domain with ``Du(source) = target``
by homotopy continuation from the Hessian equation, and checks the a-priori
estimates on the computed solutions.
"""

__version__ = "0.1.0"

from .domains import DomainSpec, disc_domain, ellipse_domain, superellipse_domain, theta0
from .grid import Grid, build_grid, derivatives
from .solver import SolveConfig, SolveState, continuation_solve, solve_at_t

__all__ = [
    "DomainSpec", "disc_domain", "ellipse_domain", "superellipse_domain", "theta0",
    "Grid", "build_grid", "derivatives",
    "SolveConfig", "SolveState", "continuation_solve", "solve_at_t",
    "__version__",
]
