"""Resource allocation by bisection and its laminar (nested) generalisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import ModelError


class SolverError(RuntimeError):
    pass


def _bisect(fn, lo, hi, target, max_iter=400):
    """Find ``v`` in ``[lo, hi]`` with nondecreasing ``fn(v) = target``.

    Runs until the bracket stops shrinking in floating point, then returns the
    endpoint with the smaller residual.
    """
    f_lo, f_hi = fn(lo), fn(hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = fn(mid)
        if f_mid < target:
            lo, f_lo = mid, f_mid
        elif f_mid > target:
            hi, f_hi = mid, f_mid
        else:
            return mid
    return lo if abs(f_lo - target) <= abs(f_hi - target) else hi


def _expand_bracket(fn, lo, hi, target, limit=200):
    # doubling keeps the bracket robust when gradient bounds are loose
    width = max(1.0, hi - lo)
    k = 0
    while fn(lo) > target and k < limit:
        lo -= width
        width *= 2
        k += 1
    width = max(1.0, hi - lo)
    k = 0
    while fn(hi) < target and k < limit:
        hi += width
        width *= 2
        k += 1
    return lo, hi


@dataclass
class RAPResult:
    x: np.ndarray
    lam: float
    residual: float


def _clipped(costs, l, u):
    def x_of(nu):
        return np.array([float(f.clipped_inverse_gradient(nu, l[i], u[i])[0]) for i, f in enumerate(costs)])
    return x_of


def solve_rap(costs, l, u, R) -> RAPResult:
    """``min sum f_i(x_i)  s.t.  sum x_i = R, l <= x <= u`` with scalar ``x_i``.

    Returns the optimum and the multiplier ``lam`` of the equality in the
    convention ``grad f_i(x_i) + lam = 0`` at interior coordinates.
    """
    costs = list(costs)
    l = np.asarray(l, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if any(f.dim != 1 for f in costs):
        raise ModelError("solve_rap needs scalar stages")
    if any(not f.strictly_convex for f in costs):
        raise ModelError("solve_rap needs strictly convex costs")
    tol = 1e-9 * max(1.0, abs(R))
    if R < l.sum() - tol or R > u.sum() + tol:
        raise ModelError(f"infeasible resource {R!r} outside [{l.sum()!r}, {u.sum()!r}]")
    x_of = _clipped(costs, l, u)
    g_lo = [f._coordinate_gradient(np.array([l[i]]))[0] for i, f in enumerate(costs)]
    g_hi = [f._coordinate_gradient(np.array([u[i]]))[0] for i, f in enumerate(costs)]
    lo, hi = float(min(g_lo)), float(max(g_hi))
    total = lambda v: float(x_of(v).sum())  # noqa: E731
    lo, hi = _expand_bracket(total, lo, hi, R)
    nu = _bisect(total, lo, hi, R)
    x = x_of(nu)
    return RAPResult(x=x, lam=-nu, residual=float(x.sum() - R))


# ---------------------------------------------------------------------------
# Laminar families

@dataclass
class _Node:
    members: frozenset
    capacity: float
    index: int  # row index in the instance, -1 for the ground set
    children: list


def _laminar_tree(family):
    """Tree of family sets below the ground set; stages are implicit leaves."""
    order = sorted(range(len(family.sets)), key=lambda j: (-len(family.sets[j]), j))
    root = _Node(frozenset(range(family.T)), float(family.total), -1, [])
    for j in order:
        s = family.sets[j]
        node = root
        while True:
            nxt = next((ch for ch in node.children if s < ch.members), None)
            if nxt is None:
                break
            node = nxt
        node.children.append(_Node(s, float(family.capacities[j]), j, []))
    return root


def _uncovered(node):
    covered = set()
    for ch in node.children:
        covered |= ch.members
    return sorted(node.members - covered)


def solve_nested_rap(instance):
    """Exact solver for laminar instances built by ``embed_laminar``.

    For a price ``nu`` the largest amount a family set absorbs is
    ``A_X(nu) = min(c_X, sum_children A_C(nu))`` with stage leaves
    ``clip(grad f^{-1}(nu))``.  The root price solves ``A = total``; each set
    whose children overshoot its capacity receives ``mu_X`` solving
    ``sum_children A_C(nu - mu_X) = c_X`` from the top down.
    """
    from ..model import MultiplierVector
    from .solution import finalize

    family = instance.structure
    if getattr(family, "kind", None) != "laminar":
        raise ModelError("solve_nested_rap needs a laminar instance")
    if any(not f.strictly_convex for f in instance.costs):
        raise ModelError("solve_nested_rap needs strictly convex costs")
    root = _laminar_tree(family)
    l, u = instance.lower, instance.upper
    costs = instance.costs

    def leaf(t, v):
        return float(costs[t].clipped_inverse_gradient(v, l[t], u[t])[0])

    def capped(node, v):
        return min(node.capacity, inner(node, v))

    def inner(node, v):
        return sum(leaf(t, v) for t in _uncovered(node)) + sum(capped(ch, v) for ch in node.children)

    g_lo = min(costs[t]._coordinate_gradient(np.array([l[t]]))[0] for t in range(instance.T))
    g_hi = max(costs[t]._coordinate_gradient(np.array([u[t]]))[0] for t in range(instance.T))
    nu_root = _bisect(lambda v: inner(root, v), *_expand_bracket(lambda v: inner(root, v),
                                                                 float(g_lo), float(g_hi), root.capacity),
                      root.capacity)
    mu = np.zeros(len(family.sets))
    x = np.zeros(instance.T)

    def descend(node, v):
        for t in _uncovered(node):
            x[t] = leaf(t, v)
        for ch in node.children:
            v_ch = v
            over = inner(ch, v) - ch.capacity
            if over > 1e-12 * max(1.0, abs(ch.capacity)):
                lo = min(costs[t]._coordinate_gradient(np.array([l[t]]))[0] for t in ch.members)
                lo = min(float(lo), v)
                fn = lambda w, ch=ch: inner(ch, w)  # noqa: E731
                lo, _ = _expand_bracket(fn, lo, v, ch.capacity)
                v_ch = _bisect(fn, lo, v, ch.capacity)
                mu[ch.index] = max(v - v_ch, 0.0)
            descend(ch, v_ch)

    descend(root, nu_root)
    m = MultiplierVector(mu, np.array([-nu_root]))
    return finalize(instance, x, m, method="nested-rap")
