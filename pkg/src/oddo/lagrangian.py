"""Local Lagrangians, local Lagrangian solutions and the dual function.

The Lagrangian is ``L = f + mu.(A_ub x - b_ub) + lam.(A_eq x - b_eq)``, so the
dualized terms add ``coef^t . x^t`` to stage ``t`` with
``coef^t = A_ub[:, t].T mu + A_eq[:, t].T lam``.  The dual pressure is
``nu^t = -coef^t`` and the local Lagrangian solution minimises
``f^t(x) - nu^t . x`` over the stage box.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DomainError, Linear, ModelError, MultiplierVector, ProblemInstance


@dataclass(frozen=True, eq=False)
class AggregatedTerms:
    """Per-stage aggregated dual terms ``(sum_j mu_j a~^t_j, sum_k lam_k b~^t_k)``.

    Either part may be a scalar or a vector of the stage dimension.  The
    online engine accepts this in place of a full multiplier vector.
    """

    ineq: tuple
    eq: tuple

    def __post_init__(self):
        ineq = tuple(np.atleast_1d(np.asarray(v, dtype=float)) for v in self.ineq)
        eq = tuple(np.atleast_1d(np.asarray(v, dtype=float)) for v in self.eq)
        if len(ineq) != len(eq):
            raise ModelError("aggregated terms need one inequality and one equality part per stage")
        object.__setattr__(self, "ineq", ineq)
        object.__setattr__(self, "eq", eq)

    @property
    def T(self):
        return len(self.ineq)

    def coefficient(self, t):
        return self.ineq[t] + self.eq[t]


def _check_dims(instance: ProblemInstance, m):
    if isinstance(m, AggregatedTerms):
        if m.T != instance.T:
            raise ModelError(f"aggregated terms cover {m.T} stages, instance has {instance.T}")
        return
    c = instance.coupling
    if m.mu.size != c.n_ub or m.lam.size != c.n_eq:
        raise ModelError(
            f"multiplier dimension ({m.mu.size}, {m.lam.size}) does not match "
            f"coupling ({c.n_ub}, {c.n_eq})")


def stage_coefficient(instance: ProblemInstance, m, t) -> np.ndarray:
    """Linear coefficient of ``x^t`` contributed by the dualized constraints."""
    _check_dims(instance, m)
    if isinstance(m, AggregatedTerms):
        coef = m.coefficient(t)
        return np.broadcast_to(coef, (instance.dims[t],)).astype(float)
    out = np.zeros(instance.dims[t])
    if m.mu.size:
        out += instance.A_ub_stage(t).T @ m.mu
    if m.lam.size:
        out += instance.A_eq_stage(t).T @ m.lam
    return out


def nu(instance: ProblemInstance, m, t):
    """Dual pressure ``nu^t(mu, lam)``; a float for one-dimensional stages."""
    v = -stage_coefficient(instance, m, t)
    return float(v[0]) if v.size == 1 else v


def nu_vector(instance: ProblemInstance, m) -> np.ndarray:
    """Stacked ``nu`` over all coordinates of all stages."""
    return np.concatenate([-stage_coefficient(instance, m, t) for t in range(instance.T)])


def local_lagrangian_value(instance: ProblemInstance, t, x_t, m) -> float:
    """``f^t(x^t)`` plus the dualized coefficient terms (right-hand sides excluded)."""
    x_t = np.atleast_1d(np.asarray(x_t, dtype=float))
    return instance.costs[t].value(x_t) + float(stage_coefficient(instance, m, t) @ x_t)


def local_lagrangian_solution(instance: ProblemInstance, t, m) -> np.ndarray:
    """``clip((grad f^t)^{-1}(nu^t), l^t, u^t)`` for a strictly convex stage.

    Raises :class:`DomainError` (tagged with the stage) when the inverse
    gradient is undefined at ``nu^t``.
    """
    f = instance.costs[t]
    if not f.strictly_convex:
        raise ModelError(f"stage {t}: cost is not strictly convex, use local_lagrangian_solution_linear")
    v = -stage_coefficient(instance, m, t)
    try:
        raw = f.inverse_gradient(v)
    except DomainError as exc:
        raise DomainError(str(exc), stage=t) from None
    box = instance.boxes[t]
    return np.clip(raw, box.l, box.u)


def local_lagrangian_solution_linear(instance: ProblemInstance, t, m) -> np.ndarray:
    """Box vertex minimising the reduced cost; zero reduced cost picks the lower bound."""
    f = instance.costs[t]
    if not isinstance(f, Linear):
        raise ModelError(f"stage {t}: cost is not linear")
    reduced = f.c + stage_coefficient(instance, m, t)
    box = instance.boxes[t]
    return np.where(reduced < 0, box.u, box.l)


def lagrangian_solution(instance: ProblemInstance, m) -> np.ndarray:
    """Minimiser of the Lagrangian over the boxes (flat vector).

    Strictly convex stages use the clipped inverse gradient, which is defined
    for every ``nu`` because gradient monotonicity decides the active bound.
    """
    parts = []
    for t, f in enumerate(instance.costs):
        if isinstance(f, Linear):
            parts.append(local_lagrangian_solution_linear(instance, t, m))
        else:
            box = instance.boxes[t]
            parts.append(f.clipped_inverse_gradient(-stage_coefficient(instance, m, t), box.l, box.u))
    return np.concatenate(parts)


def dual_value(instance: ProblemInstance, m: MultiplierVector) -> float:
    """``q(mu, lam)``: the Lagrangian at its minimiser, right-hand sides included."""
    _check_dims(instance, m)
    x = lagrangian_solution(instance, m)
    total = sum(local_lagrangian_value(instance, t, x[instance.stage_slice(t)], m)
                for t in range(instance.T))
    c = instance.coupling
    return float(total - m.mu @ c.b_ub - m.lam @ c.b_eq)
