"""Projection of the feasible set onto the current stage.

Three routes compute the set of stage decisions that still admit a feasible
completion once earlier stages are fixed:

* generic Fourier-Motzkin elimination of the later stages,
* the O(T) backward recursion for battery instances,
* two linear programs (min and max of ``x^t``) over the remaining horizon.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelError, ProblemInstance
from .simplex import LPInfeasible, solve_lp

EMPTY_TOL = 1e-9


class InfeasiblePrefix(ModelError):
    """The fixed prefix admits no feasible completion."""


@dataclass(frozen=True)
class StageInterval:
    lo: float
    hi: float

    def clip(self, x):
        return min(max(x, self.lo), self.hi)

    def contains(self, x, tol=EMPTY_TOL):
        return self.lo - tol <= x <= self.hi + tol

    @property
    def width(self):
        return self.hi - self.lo


def _make_interval(lo, hi, context="") -> StageInterval:
    if lo > hi + EMPTY_TOL * max(1.0, abs(lo), abs(hi)):
        raise InfeasiblePrefix(f"empty projection {context}: lo={lo!r} > hi={hi!r}")
    if lo > hi:
        lo = hi = 0.5 * (lo + hi)
    return StageInterval(float(lo), float(hi))


# ---------------------------------------------------------------------------
# Affine systems and Fourier-Motzkin elimination

@dataclass(frozen=True, eq=False)
class AffineSystem:
    """Rows ``A @ v <= b`` over the named variables ``variables``.

    ``origin`` records, for each row, the set of input row indices it was
    derived from, so an infeasibility can be traced back to original rows.
    """

    A: np.ndarray
    b: np.ndarray
    variables: tuple
    origin: tuple = ()
    labels: tuple = ()

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float)
        if A.size != b.size * len(self.variables):
            raise ModelError("system rows and right-hand side differ in length")
        A = A.reshape(b.size, len(self.variables))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "variables", tuple(self.variables))
        if not self.origin:
            object.__setattr__(self, "origin", tuple(frozenset([i]) for i in range(b.size)))

    @classmethod
    def from_rows(cls, A_ub, b_ub, A_eq=None, b_eq=None, variables=None, labels=()):
        """Build from inequality and equality rows; equalities become pairs."""
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        n = A_ub.shape[1] if A_ub.size else np.atleast_2d(np.asarray(A_eq, dtype=float)).shape[1]
        A_ub = A_ub.reshape(-1, n)
        parts_A, parts_b = [A_ub], [np.asarray(b_ub, dtype=float).reshape(-1)]
        if A_eq is not None and np.size(A_eq):
            A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
            b_eq = np.asarray(b_eq, dtype=float).reshape(-1)
            parts_A += [A_eq, -A_eq]
            parts_b += [b_eq, -b_eq]
        variables = tuple(range(n)) if variables is None else tuple(variables)
        return cls(np.vstack(parts_A), np.concatenate(parts_b), variables, labels=tuple(labels))

    @property
    def n_rows(self):
        return self.b.size

    def contains(self, point, tol=1e-9) -> bool:
        point = np.asarray(point, dtype=float)
        if self.n_rows == 0:
            return True
        return bool(np.all(self.A @ point <= self.b + tol))

    def trivial_violations(self, tol=EMPTY_TOL):
        """Rows with all-zero coefficients and negative right-hand side."""
        zero = np.all(self.A == 0.0, axis=1)
        return np.flatnonzero(zero & (self.b < -tol * np.maximum(1.0, np.abs(self.b))))

    def describe_origin(self, row) -> str:
        idx = sorted(self.origin[row])
        if self.labels:
            return " + ".join(str(self.labels[i]) for i in idx)
        return "rows " + ", ".join(str(i) for i in idx)


def _prune(A, b, origin):
    """Drop trivially satisfied zero rows and duplicates with a weaker rhs."""
    best = {}
    for i in range(b.size):
        row = A[i]
        if not np.any(row):
            if b[i] >= 0:
                continue
        key = tuple(np.round(row, 12) + 0.0)
        if key not in best or b[i] < b[best[key]]:
            best[key] = i
    keep = sorted(best.values())
    return A[keep], b[keep], tuple(origin[i] for i in keep)


def fme_eliminate(system: AffineSystem, var) -> AffineSystem:
    """Eliminate variable ``var`` (a name in ``system.variables``).

    Every row with a positive coefficient is paired with every row with a
    negative coefficient; rows without the variable pass through.
    """
    if var not in system.variables:
        return system
    j = system.variables.index(var)
    A, b = system.A, system.b
    col = A[:, j]
    pos = np.flatnonzero(col > 0)
    neg = np.flatnonzero(col < 0)
    zero = np.flatnonzero(col == 0)
    rows, rhs, origin = [A[zero]], [b[zero]], [system.origin[i] for i in zero]
    if pos.size and neg.size:
        P = A[pos] / col[pos, None]
        bp = b[pos] / col[pos]
        N = A[neg] / -col[neg, None]
        bn = b[neg] / -col[neg]
        combo = (P[:, None, :] + N[None, :, :]).reshape(-1, A.shape[1])
        rows.append(combo)
        rhs.append((bp[:, None] + bn[None, :]).reshape(-1))
        origin += [system.origin[p] | system.origin[q] for p in pos for q in neg]
    A2 = np.delete(np.vstack(rows), j, axis=1)
    A2[:, :] = np.where(np.abs(A2) < 1e-13, 0.0, A2)
    b2 = np.concatenate(rhs)
    A2, b2, origin = _prune(A2, b2, tuple(origin))
    variables = system.variables[:j] + system.variables[j + 1:]
    return AffineSystem(A2, b2, variables, origin, system.labels)


def remaining_system(instance: ProblemInstance, fixed_prefix, t_bar):
    """Constraints over stages ``t_bar..T-1`` with the prefix substituted.

    Returns ``(A_ub, b_ub, A_eq, b_eq, lb, ub, offset)`` where columns start at
    the first coordinate of stage ``t_bar`` (``offset`` in the flat vector).
    """
    start = instance.stage_slice(t_bar).start if t_bar < instance.T else instance.n
    prefix = np.concatenate([np.atleast_1d(np.asarray(v, dtype=float)) for v in fixed_prefix]) \
        if len(fixed_prefix) else np.zeros(0)
    if prefix.size != start:
        raise ModelError(f"prefix has {prefix.size} coordinates, stage {t_bar} starts at {start}")
    c = instance.coupling
    A_ub, A_eq = c.A_ub, c.A_eq
    b_ub = c.b_ub - (A_ub[:, :start] @ prefix if c.n_ub else 0.0)
    b_eq = c.b_eq - (A_eq[:, :start] @ prefix if c.n_eq else 0.0)
    A_ub_r = A_ub[:, start:] if c.n_ub else np.zeros((0, instance.n - start))
    A_eq_r = A_eq[:, start:] if c.n_eq else np.zeros((0, instance.n - start))
    return A_ub_r, b_ub, A_eq_r, b_eq, instance.lower[start:], instance.upper[start:], start


def project_onto_stage(instance: ProblemInstance, fixed_prefix, t_bar):
    """Exact projection of the feasible set onto stage ``t_bar`` via FME.

    One-dimensional stages yield a :class:`StageInterval`; multi-dimensional
    stages yield the :class:`AffineSystem` over the stage coordinates.
    """
    A_ub, b_ub, A_eq, b_eq, lb, ub, start = remaining_system(instance, fixed_prefix, t_bar)
    n_rem = lb.size
    dim = instance.dims[t_bar]
    # boxes of the later stages take part in the elimination
    later = np.arange(dim, n_rem)
    box_A = np.zeros((2 * later.size, n_rem))
    box_A[np.arange(later.size), later] = 1.0
    box_A[later.size + np.arange(later.size), later] = -1.0
    box_b = np.concatenate([ub[later], -lb[later]])
    c = instance.coupling
    labels = list(c.ub_labels or [f"ineq{i}" for i in range(c.n_ub)])
    eq_labels = list(c.eq_labels or [f"eq{k}" for k in range(c.n_eq)])
    labels += [f"{s}(<=)" for s in eq_labels] + [f"{s}(>=)" for s in eq_labels]
    labels += [f"upper[{start + i}]" for i in later] + [f"lower[{start + i}]" for i in later]
    system = AffineSystem.from_rows(A_ub, b_ub, A_eq, b_eq, variables=range(n_rem))
    system = AffineSystem(np.vstack([system.A, box_A]), np.concatenate([system.b, box_b]),
                          system.variables, labels=tuple(labels))
    for v in reversed(range(dim, n_rem)):
        system = fme_eliminate(system, v)
    bad = system.trivial_violations()
    if bad.size:
        raise InfeasiblePrefix(
            f"stage {t_bar}: prefix admits no completion (derived from {system.describe_origin(bad[0])})")
    box = instance.boxes[t_bar]
    if dim > 1:
        eye = np.eye(dim)
        return AffineSystem(np.vstack([system.A, eye, -eye]),
                            np.concatenate([system.b, box.u, -box.l]), system.variables)
    lo, hi = float(box.l[0]), float(box.u[0])
    for a, rhs in zip(system.A[:, 0], system.b):
        if a > 0:
            hi = min(hi, rhs / a)
        elif a < 0:
            lo = max(lo, rhs / a)
    return _make_interval(lo, hi, f"at stage {t_bar}")


def lp_stage_interval(instance: ProblemInstance, fixed_prefix, t_bar) -> StageInterval:
    """Projection interval of a one-dimensional stage by two linear programs."""
    if instance.dims[t_bar] != 1:
        raise ModelError("LP interval needs a one-dimensional stage")
    A_ub, b_ub, A_eq, b_eq, lb, ub, _ = remaining_system(instance, fixed_prefix, t_bar)
    c = np.zeros(lb.size)
    c[0] = 1.0
    try:
        lo = solve_lp(c, A_ub, b_ub, A_eq, b_eq, lb, ub).x[0]
        hi = solve_lp(-c, A_ub, b_ub, A_eq, b_eq, lb, ub).x[0]
    except LPInfeasible as exc:
        raise InfeasiblePrefix(f"stage {t_bar}: prefix admits no completion ({exc})") from None
    return _make_interval(lo, hi, f"at stage {t_bar}")


def has_feasible_completion(instance: ProblemInstance, fixed_prefix) -> bool:
    """Whether the remaining-horizon feasibility problem is solvable."""
    k = len(fixed_prefix)
    for t, x in enumerate(fixed_prefix):
        box = instance.boxes[t]
        x = np.asarray(x, dtype=float).reshape(-1)
        if np.any(x < box.l - EMPTY_TOL) or np.any(x > box.u + EMPTY_TOL):
            return False
    if k == instance.T:
        from .model import check_feasibility, flatten
        return check_feasibility(instance, flatten(fixed_prefix), tol=1e-8).feasible
    A_ub, b_ub, A_eq, b_eq, lb, ub, _ = remaining_system(instance, fixed_prefix, k)
    try:
        solve_lp(np.zeros(lb.size), A_ub, b_ub, A_eq, b_eq, lb, ub)
    except LPInfeasible:
        return False
    return True


# ---------------------------------------------------------------------------
# Battery recursion

@dataclass(frozen=True, eq=False)
class BatteryBounds:
    """Tightened state-of-charge bands; index ``t`` is the SoC after stage ``t``."""

    lo: np.ndarray
    hi: np.ndarray


def battery_projection_bounds(params) -> BatteryBounds:
    """Backward recursion for the reachable state-of-charge band.

    ``params`` needs ``T, dt, l, u, C_lo, C_hi, C_end`` with ``C_lo``/``C_hi``
    covering stages ``0..T-2``.
    """
    T, dt = int(params.T), float(params.dt)
    l = np.broadcast_to(np.asarray(params.l, dtype=float), (T,))
    u = np.broadcast_to(np.asarray(params.u, dtype=float), (T,))
    C_lo = np.asarray(params.C_lo, dtype=float).reshape(-1)
    C_hi = np.asarray(params.C_hi, dtype=float).reshape(-1)
    if C_lo.size != T - 1 or C_hi.size != T - 1:
        raise ModelError("SoC bounds need T-1 entries")
    lo = np.empty(T)
    hi = np.empty(T)
    lo[-1] = hi[-1] = float(params.C_end)
    for t in range(T - 2, -1, -1):
        lo[t] = max(C_lo[t], lo[t + 1] - dt * u[t + 1])
        hi[t] = min(C_hi[t], hi[t + 1] - dt * l[t + 1])
        if lo[t] > hi[t] + EMPTY_TOL * max(1.0, abs(lo[t])):
            raise ModelError(f"battery instance infeasible: SoC band empty after stage {t}")
    # the initial state (zero) must reach the first band
    if lo[0] - dt * u[0] > EMPTY_TOL * max(1.0, abs(lo[0])) or dt * l[0] - hi[0] > EMPTY_TOL * max(1.0, abs(hi[0])):
        raise ModelError("battery instance infeasible: first band unreachable from the initial state")
    return BatteryBounds(lo, hi)


def battery_stage_interval(t_bar, prefix_energy, bounds: BatteryBounds, l, u, dt) -> StageInterval:
    """``[max((lo - E)/dt, l), min((hi - E)/dt, u)]`` for prefix energy ``E``."""
    lo = max((bounds.lo[t_bar] - prefix_energy) / dt, float(l))
    hi = min((bounds.hi[t_bar] - prefix_energy) / dt, float(u))
    return _make_interval(lo, hi, f"at stage {t_bar}")
