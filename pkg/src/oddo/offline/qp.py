"""Primal active-set method for separable quadratic costs with affine rows."""
from __future__ import annotations

import numpy as np

from ..model import ModelError, MultiplierVector, ProblemInstance, Quadratic, ScaledShifted, Square
from ..simplex import LPInfeasible, solve_lp
from .rap import SolverError


def _quadratic_terms(instance: ProblemInstance):
    """Diagonal Hessian ``h`` and linear term ``g`` with ``f = 1/2 h x^2 + g x + const``."""
    h, g = [], []
    for t, f in enumerate(instance.costs):
        if isinstance(f, Quadratic):
            h.append(np.full(f.dim, 2.0))
            g.append(2.0 * f.p)
        elif isinstance(f, ScaledShifted) and isinstance(f.base, Square):
            h.append(2.0 / f.a)
            g.append(2.0 * f.b)
        else:
            raise ModelError(f"stage {t}: quadratic solver needs quadratic costs")
    return np.concatenate(h), np.concatenate(g)


def _rows(instance: ProblemInstance):
    """All inequality rows ``G x <= q`` (coupling, then upper and lower bounds)."""
    c = instance.coupling
    n = instance.n
    G = np.vstack([c.A_ub.reshape(-1, n), np.eye(n), -np.eye(n)])
    q = np.concatenate([c.b_ub, instance.upper, -instance.lower])
    return G, q


def _start(instance, G, q, E, e):
    x = np.clip(np.zeros(instance.n), instance.lower, instance.upper)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(q), initial=0.0)))
    if np.all(G @ x <= q + tol) and (E.shape[0] == 0 or np.all(np.abs(E @ x - e) <= tol)):
        return x
    c = instance.coupling
    try:
        return solve_lp(np.zeros(instance.n), c.A_ub, c.b_ub, c.A_eq, c.b_eq,
                        instance.lower, instance.upper).x
    except LPInfeasible as exc:
        raise SolverError(f"infeasible instance: {exc}") from None


def solve_qp_with_duals(instance: ProblemInstance, max_iter=None):
    """Active-set solve of ``min sum f^t`` for (diagonal) quadratic costs.

    Each iteration solves the equality-constrained step on the working set;
    a negative multiplier leaves the set (most negative first), a blocking
    row enters (lowest index among ties).
    """
    from .solution import finalize

    h, g = _quadratic_terms(instance)
    G, q = _rows(instance)
    c = instance.coupling
    E = c.A_eq.reshape(-1, instance.n)
    e = c.b_eq
    n, n_eq, n_in = instance.n, E.shape[0], G.shape[0]
    x = _start(instance, G, q, E, e)
    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)), float(np.max(np.abs(q), initial=0.0)))
    working: list[int] = []
    hinv = 1.0 / h
    max_iter = max_iter or 20 * (n + n_in)
    y = np.zeros(n_eq)
    z = np.zeros(0)
    for _ in range(max_iter):
        A_w = np.vstack([E, G[working]]) if working else E
        grad = h * x + g
        if A_w.shape[0]:
            S = (A_w * hinv) @ A_w.T
            rhs = -(A_w * hinv) @ grad
            mult = np.linalg.solve(S, rhs)
            p = -hinv * (grad + A_w.T @ mult)
        else:
            mult = np.zeros(0)
            p = -hinv * grad
        if np.max(np.abs(p), initial=0.0) <= 1e-12 * scale:
            y, z = mult[:n_eq], mult[n_eq:]
            if z.size == 0 or z.min() >= -1e-10 * max(1.0, float(np.max(np.abs(mult)))):
                break
            k = int(np.argmin(z))
            working.pop(k)
            continue
        Gp = G @ p
        slack = q - G @ x
        alpha, block = 1.0, -1
        wset = set(working)
        for i in np.flatnonzero(Gp > 1e-14 * scale):
            if i in wset:
                continue
            step = max(slack[i], 0.0) / Gp[i]
            if step < alpha - 1e-15:
                alpha, block = step, int(i)
        x = x + alpha * p
        if block >= 0:
            working.append(block)
    else:
        raise SolverError("active-set iteration limit reached")
    mu_all = np.zeros(n_in)
    if working:
        mu_all[working] = np.maximum(z, 0.0)
    n_ub = c.n_ub
    m = MultiplierVector(mu_all[:n_ub], y)
    z_upper = mu_all[n_ub:n_ub + n]
    z_lower = mu_all[n_ub + n:]
    x = np.clip(x, instance.lower, instance.upper)
    return finalize(instance, x, m, method="active-set", z_lower=z_lower, z_upper=z_upper)
