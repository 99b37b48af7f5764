"""Reference solvers returning primal optima with Lagrange multipliers."""
from .kkt import KKTReport, kkt_residuals
from .oracle import OracleResult, brute_force_oracle
from .qp import solve_qp_with_duals
from .rap import RAPResult, SolverError, solve_nested_rap, solve_rap
from .solution import OfflineSolution, solve_lp_with_duals, solve_offline

__all__ = [
    "KKTReport", "kkt_residuals", "OracleResult", "brute_force_oracle", "solve_qp_with_duals",
    "RAPResult", "SolverError", "solve_nested_rap", "solve_rap", "OfflineSolution",
    "solve_lp_with_duals", "solve_offline",
]
