from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import MultiplierVector, ProblemInstance


@dataclass
class KKTReport:
    """Residuals of the KKT system at ``(x, m)``.

    Absolute values plus a scaled variant that divides by the natural
    magnitude of each quantity, which keeps the check meaningful for
    instances whose data lives at 1e4 scale.
    """

    stationarity: float
    primal: float
    dual: float
    complementarity: float
    scale_grad: float = 1.0
    scale_rhs: float = 1.0
    scale_mult: float = 1.0

    @property
    def max_abs(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)

    @property
    def max_scaled(self) -> float:
        return max(self.stationarity / self.scale_grad,
                   self.primal / self.scale_rhs,
                   self.dual / self.scale_mult,
                   self.complementarity / (self.scale_mult * self.scale_rhs))

    def ok(self, tol=1e-6) -> bool:
        return self.max_scaled <= tol

    def to_dict(self):
        return {"stationarity": self.stationarity, "primal": self.primal, "dual": self.dual,
                "complementarity": self.complementarity, "max_scaled": self.max_scaled}


def kkt_residuals(instance: ProblemInstance, x, m: MultiplierVector, box_tol=1e-9) -> KKTReport:
    """Stationarity (box-projected), primal violation, dual negativity, and
    the complementarity gap ``sum_j mu_j |g_j(x)|``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    c = instance.coupling
    grad = np.concatenate([f.gradient(x[instance.stage_slice(t)]) for t, f in enumerate(instance.costs)])
    r = grad.copy()
    if c.n_ub:
        r += c.A_ub.T @ m.mu
    if c.n_eq:
        r += c.A_eq.T @ m.lam
    lo, hi = instance.lower, instance.upper
    width = np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    at_lo = x <= lo + box_tol * width
    at_hi = x >= hi - box_tol * width
    proj = r.copy()
    # a box-bound multiplier absorbs the residual with the right sign
    proj[at_lo & (r > 0)] = 0.0
    proj[at_hi & (r < 0)] = 0.0
    proj[at_lo & at_hi] = 0.0
    g = c.A_ub @ x - c.b_ub if c.n_ub else np.zeros(0)
    h = c.A_eq @ x - c.b_eq if c.n_eq else np.zeros(0)
    box_viol = np.maximum(np.maximum(lo - x, x - hi), 0.0)
    primal = max(np.max(np.maximum(g, 0.0), initial=0.0), np.max(np.abs(h), initial=0.0),
                 np.max(box_viol, initial=0.0))
    dual = float(np.max(np.maximum(-m.mu, 0.0), initial=0.0))
    comp = float(np.sum(m.mu * np.abs(g))) if c.n_ub else 0.0
    scale_grad = 1.0 + float(np.max(np.abs(grad), initial=0.0))
    scale_rhs = 1.0 + float(max(np.max(np.abs(c.b_ub), initial=0.0), np.max(np.abs(c.b_eq), initial=0.0),
                                np.max(np.abs(x), initial=0.0)))
    scale_mult = 1.0 + float(np.max(np.abs(m.to_array()), initial=0.0))
    return KKTReport(float(np.max(np.abs(proj), initial=0.0)), float(primal), dual, comp,
                     scale_grad, scale_rhs, scale_mult)
