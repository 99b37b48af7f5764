"""Grid-search oracle for tiny instances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import ModelError, ProblemInstance
from .rap import SolverError

MAX_DIM = 5


@dataclass
class OracleResult:
    x: np.ndarray
    objective: float
    grid_points: int
    feasible_points: int


def _pivot_columns(E, tol=1e-12):
    """Column indices of a reduced row echelon form of ``E`` (Gauss-Jordan)."""
    R = E.astype(float).copy()
    rows, cols = R.shape
    piv = []
    r = 0
    for j in range(cols):
        if r >= rows:
            break
        k = r + int(np.argmax(np.abs(R[r:, j])))
        if abs(R[k, j]) <= tol:
            continue
        R[[r, k]] = R[[k, r]]
        R[r] /= R[r, j]
        for i in range(rows):
            if i != r:
                R[i] -= R[i, j] * R[r]
        piv.append(j)
        r += 1
    return piv


def brute_force_oracle(instance: ProblemInstance, resolution: float, chunk=200_000,
                       tol=1e-9) -> OracleResult:
    """Best feasible point of a grid over the box, at spacing ``resolution``.

    Equality rows are used to solve for pivot coordinates, so only the free
    coordinates are gridded.
    """
    n = instance.n
    if n > MAX_DIM:
        raise ModelError(f"oracle limited to total dimension {MAX_DIM}, got {n}")
    if resolution <= 0:
        raise ModelError("resolution must be positive")
    c = instance.coupling
    lo, hi = instance.lower, instance.upper
    E = c.A_eq.reshape(-1, n) if c.n_eq else np.zeros((0, n))
    piv = _pivot_columns(E) if E.shape[0] else []
    free = [j for j in range(n) if j not in piv]
    axes = []
    for j in free:
        k = max(1, int(np.ceil((hi[j] - lo[j]) / resolution - 1e-9)))
        axes.append(np.linspace(lo[j], hi[j], k + 1))
    sizes = [a.size for a in axes]
    total = int(np.prod(sizes)) if sizes else 1
    scale = max(1.0, float(np.max(np.abs(np.concatenate([c.b_ub, c.b_eq, lo, hi])), initial=0.0)))
    best_val, best_x, n_feas = np.inf, None, 0
    if piv:
        Ep, Ef = E[:, piv], E[:, free]
        Ep_pinv = np.linalg.pinv(Ep)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        X = np.zeros((idx.size, n))
        if free:
            coords = np.unravel_index(idx, sizes)
            for k, j in enumerate(free):
                X[:, j] = axes[k][coords[k]]
        if piv:
            X[:, piv] = ((c.b_eq[:, None] - Ef @ X[:, free].T).T) @ Ep_pinv.T
            ok = np.all(np.abs(X @ E.T - c.b_eq) <= tol * scale, axis=1)
        else:
            ok = np.ones(idx.size, dtype=bool)
        ok &= np.all(X >= lo - tol * scale, axis=1) & np.all(X <= hi + tol * scale, axis=1)
        if c.n_ub:
            ok &= np.all(X @ c.A_ub.T <= c.b_ub + tol * scale, axis=1)
        if not ok.any():
            continue
        Xf = X[ok]
        n_feas += Xf.shape[0]
        vals = np.zeros(Xf.shape[0])
        for t, f in enumerate(instance.costs):
            sl = instance.stage_slice(t)
            vals += np.array([f.value(row[sl]) for row in Xf]) if not _vectorizable(f) else _batch_value(f, Xf[:, sl])
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_x = float(vals[k]), Xf[k].copy()
    if best_x is None:
        raise SolverError("no feasible grid point")
    return OracleResult(best_x, best_val, total, n_feas)


def _vectorizable(f):
    from ..model import Linear, Quadratic, ScaledShifted
    return isinstance(f, (Linear, Quadratic, ScaledShifted))


def _batch_value(f, X):
    from ..model import Linear, Quadratic

    if isinstance(f, Quadratic):
        return np.sum((f.p + X) ** 2, axis=1) + f.const
    if isinstance(f, Linear):
        return X @ f.c
    y = X / f.a + f.b
    return np.sum(f.a * f.base.value(np.maximum(y, 0.0) if _is_power(f) else y), axis=1)


def _is_power(f):
    from ..model import Power
    return isinstance(f.base, Power)
