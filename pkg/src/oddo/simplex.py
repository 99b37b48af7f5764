"""Dense two-phase tableau simplex with Bland's rule and dual recovery.

Solves ``min c.x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub``.

Multipliers follow the Lagrangian convention used across the package::

    c + A_ub.T @ mu + A_eq.T @ lam - z_lower + z_upper = 0,
    mu, z_lower, z_upper >= 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


class LPInfeasible(LPError):
    pass


class LPUnbounded(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    mu: np.ndarray
    lam: np.ndarray
    z_lower: np.ndarray
    z_upper: np.ndarray
    basis: tuple
    iterations: int


def _pivot(tab, r, c):
    tab[r] /= tab[r, c]
    col = tab[:, c].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])
    tab[:, c] = 0.0
    tab[r, c] = 1.0


def _run(tab, basis, allowed, tol, max_iter):
    """Bland's rule on the tableau; the last row holds reduced costs."""
    m = tab.shape[0] - 1
    it = 0
    while True:
        d = tab[-1, :allowed]
        cand = np.flatnonzero(d < -tol)
        if cand.size == 0:
            return it
        j = int(cand[0])
        col = tab[:m, j]
        pos = np.flatnonzero(col > tol)
        if pos.size == 0:
            raise LPUnbounded("objective unbounded below")
        rhs = np.maximum(tab[pos, -1], 0.0)
        ratios = rhs / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(tab, r, j)
        basis[r] = j
        it += 1
        if it > max_iter:
            raise LPError("simplex iteration limit reached")


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
             tol=1e-9, max_iter=50_000) -> LPResult:
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    lb = np.zeros(n) if lb is None else np.broadcast_to(np.asarray(lb, dtype=float), (n,)).copy()
    ub = np.full(n, np.inf) if ub is None else np.broadcast_to(np.asarray(ub, dtype=float), (n,)).copy()
    if not np.all(np.isfinite(lb)):
        raise LPError("lower bounds must be finite")
    if np.any(lb > ub):
        raise LPInfeasible("lower bound exceeds upper bound")

    # shift x = lb + y so that y >= 0; finite upper bounds become rows
    bounded = np.flatnonzero(np.isfinite(ub))
    m_ub, m_eq, m_bd = A_ub.shape[0], A_eq.shape[0], bounded.size
    U = np.zeros((m_bd, n))
    U[np.arange(m_bd), bounded] = 1.0
    rows_ineq = np.vstack([A_ub, U])
    rhs_ineq = np.concatenate([b_ub - A_ub @ lb, (ub - lb)[bounded]])
    m_in = rows_ineq.shape[0]
    m = m_in + m_eq

    A = np.zeros((m, n + m_in))
    A[:m_in, :n] = rows_ineq
    A[:m_in, n:] = np.eye(m_in)
    A[m_in:, :n] = A_eq
    b = np.concatenate([rhs_ineq, b_eq - A_eq @ lb])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b *= sign

    # rows whose slack is a valid starting basic variable skip the artificial
    n_struct = n + m_in
    basis = []
    art_rows = []
    for i in range(m):
        if i < m_in and sign[i] > 0:
            basis.append(n + i)
        else:
            art_rows.append(i)
            basis.append(-1)
    n_art = len(art_rows)
    width = n_struct + n_art
    tab = np.zeros((m + 1, width + 1))
    tab[:m, :n_struct] = A
    tab[:m, -1] = b
    for k, i in enumerate(art_rows):
        tab[i, n_struct + k] = 1.0
        basis[i] = n_struct + k
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))

    iters = 0
    if n_art:
        tab[-1, :] = 0.0
        for i in art_rows:
            tab[-1, :] -= tab[i, :]
        for k in range(n_art):
            tab[-1, n_struct + k] = 0.0
        iters += _run(tab, basis, width, tol, max_iter)
        if -tab[-1, -1] > tol * scale * 10:
            raise LPInfeasible(f"phase one residual {-tab[-1, -1]:.3g}")
        # drive remaining artificials out of the basis, dropping redundant rows
        keep = []
        for i in range(m):
            if basis[i] >= n_struct:
                row = tab[i, :n_struct]
                nz = np.flatnonzero(np.abs(row) > 1e-9)
                if nz.size == 0:
                    continue
                j = int(nz[0])
                _pivot(tab, i, j)
                basis[i] = j
            keep.append(i)
        tab = np.vstack([tab[keep], tab[-1:]])
        basis = [basis[i] for i in keep]
        kept_rows = np.array(keep, dtype=int)
        tab = np.delete(tab, np.s_[n_struct:width], axis=1)
    else:
        kept_rows = np.arange(m)

    cost = np.zeros(n_struct)
    cost[:n] = c
    mk = len(basis)
    tab[-1, :] = 0.0
    tab[-1, :n_struct] = cost
    for i in range(mk):
        tab[-1, :] -= cost[basis[i]] * tab[i, :]
    iters += _run(tab, basis, n_struct, tol * max(1.0, float(np.max(np.abs(c), initial=0.0))), max_iter)

    # recover primal and dual values from the terminal basis
    A_k = A[kept_rows]
    b_k = b[kept_rows]
    B = A_k[:, basis]
    z = np.zeros(n_struct)
    if mk:
        z[basis] = np.linalg.solve(B, b_k)
        y_k = np.linalg.solve(B.T, cost[basis])
    else:
        y_k = np.zeros(0)
    y = np.zeros(m)
    y[kept_rows] = y_k
    y *= sign  # duals of the unflipped rows
    x = lb + z[:n]
    x = np.minimum(np.maximum(x, lb), ub)
    rows_all = np.vstack([rows_ineq, A_eq]) if m else np.zeros((0, n))
    reduced = c - rows_all.T @ y if m else c.copy()
    mu = np.maximum(-y[:m_ub], 0.0)
    z_upper = np.zeros(n)
    z_upper[bounded] = np.maximum(-y[m_ub:m_in], 0.0)
    lam = -y[m_in:]
    z_lower = np.maximum(reduced, 0.0)
    return LPResult(x=x, objective=float(c @ x), mu=mu, lam=lam, z_lower=z_lower,
                    z_upper=z_upper, basis=tuple(int(v) for v in basis), iterations=iters)
