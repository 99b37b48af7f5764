from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import Linear, ModelError, MultiplierVector, ProblemInstance, evaluate_objective
from ..simplex import LPError, LPInfeasible, solve_lp
from .kkt import KKTReport, kkt_residuals
from .rap import SolverError


@dataclass
class OfflineSolution:
    x_star: np.ndarray
    multipliers: MultiplierVector
    objective: float
    kkt: KKTReport
    method: str = ""
    z_lower: np.ndarray | None = None
    z_upper: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"x": self.x_star.tolist(), "objective": self.objective, "method": self.method,
                "multipliers": self.multipliers.to_dict(), "kkt": self.kkt.to_dict()}


def finalize(instance, x, m, method, z_lower=None, z_upper=None, **extra) -> OfflineSolution:
    x = np.asarray(x, dtype=float)
    return OfflineSolution(x, m, evaluate_objective(instance, x), kkt_residuals(instance, x, m),
                           method, z_lower, z_upper, dict(extra))


def solve_lp_with_duals(instance: ProblemInstance) -> OfflineSolution:
    """Dense simplex on an instance whose stage costs are all linear."""
    if not all(isinstance(f, Linear) for f in instance.costs):
        raise ModelError("solve_lp_with_duals needs linear costs")
    c_vec = np.concatenate([f.c for f in instance.costs])
    cc = instance.coupling
    try:
        res = solve_lp(c_vec, cc.A_ub, cc.b_ub, cc.A_eq, cc.b_eq, instance.lower, instance.upper)
    except LPInfeasible as exc:
        raise SolverError(f"infeasible instance: {exc}") from None
    except LPError as exc:
        raise SolverError(str(exc)) from None
    m = MultiplierVector(res.mu, res.lam)
    return finalize(instance, res.x, m, "simplex", res.z_lower, res.z_upper, basis=res.basis)


def solve_offline(instance: ProblemInstance) -> OfflineSolution:
    """Pick the reference solver matching the instance's cost and structure."""
    from .qp import solve_qp_with_duals
    from .rap import solve_nested_rap, solve_rap

    costs = instance.costs
    if all(isinstance(f, Linear) for f in costs):
        return solve_lp_with_duals(instance)
    if any(isinstance(f, Linear) for f in costs):
        raise ModelError("mixed linear and strictly convex stages are not supported")
    kind = getattr(instance.structure, "kind", None)
    one_d = all(f.dim == 1 for f in costs)
    if kind == "laminar" and one_d:
        return solve_nested_rap(instance)
    c = instance.coupling
    if one_d and c.n_ub == 0 and c.n_eq == 1 and np.allclose(c.A_eq, c.A_eq[0, 0]) and c.A_eq[0, 0] != 0:
        a = float(c.A_eq[0, 0])
        res = solve_rap(costs, instance.lower, instance.upper, float(c.b_eq[0]) / a)
        m = MultiplierVector(np.zeros(0), np.array([res.lam / a]))
        return finalize(instance, res.x, m, "rap")
    try:
        return solve_qp_with_duals(instance)
    except ModelError:
        raise SolverError("no offline solver for this cost structure") from None
