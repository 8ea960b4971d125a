"""Dense LP and binary MILP solvers."""
from .milp import solve_milp
from .problem import FEAS_TOL, INT_TOL, OPT_TOL, LpProblem, LpSolution, MilpProblem, Status
from .simplex import solve_lp

__all__ = ["LpProblem", "LpSolution", "MilpProblem", "Status", "solve_lp", "solve_milp",
           "FEAS_TOL", "OPT_TOL", "INT_TOL"]
