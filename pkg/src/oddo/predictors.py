"""Multiplier predictions from training data."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .lagrangian import AggregatedTerms
from .model import BaseFunction, ModelError, MultiplierVector

CANDIDATES = ("min", "max", "mean", "median")


def _stack(H: Sequence[MultiplierVector]):
    if not H:
        raise ModelError("multiplier history is empty")
    n_mu = H[0].mu.size
    if any(h.mu.size != n_mu or h.lam.size != H[0].lam.size for h in H):
        raise ModelError("multiplier history has mixed dimensions")
    return np.vstack([h.to_array() for h in H]), n_mu


def candidate(H: Sequence[MultiplierVector], kind: str) -> MultiplierVector:
    """Component-wise min, max, mean or median over the history.

    The median of an even-sized history averages the two middle values.
    """
    M, n_mu = _stack(H)
    if kind == "min":
        v = M.min(axis=0)
    elif kind == "max":
        v = M.max(axis=0)
    elif kind == "mean":
        v = M.mean(axis=0)
    elif kind in ("median", "med"):
        v = np.median(M, axis=0)
    else:
        raise ModelError(f"unknown candidate {kind!r}")
    mu = np.maximum(v[:n_mu], 0.0)
    return MultiplierVector(mu, v[n_mu:])


def nominal_parameters(P) -> np.ndarray:
    """Element-wise mean of the training parameters."""
    arrs = [np.asarray(p, dtype=float) for p in P]
    if not arrs:
        raise ModelError("parameter history is empty")
    if any(a.shape != arrs[0].shape for a in arrs):
        raise ModelError("parameter history has mixed shapes")
    return np.mean(np.stack(arrs), axis=0)


def nominal_strategy(instance, P, with_parameters):
    """Solve the instance with nominal parameters.

    ``with_parameters(instance, params)`` rebuilds the instance with the given
    uncertain parameters.  Returns ``(x_nominal, m_nominal, solution)``; the
    decision stays feasible for any realised costs because constraints do not
    depend on them.
    """
    from .offline import solve_offline

    nominal = with_parameters(instance, nominal_parameters(P))
    sol = solve_offline(nominal)
    return sol.x_star, sol.multipliers, sol


def aggregate_rap_predictor(R, a, predicted_aggregate, base: BaseFunction) -> float:
    """Equality multiplier of a resource allocation problem with scaled-shifted costs.

    With all box constraints inactive the optimum has ``x_i/a_i + b_i`` equal
    to ``(R + sum a_i b_i) / sum a_i``, so only the aggregate ``sum a_i b_i`` is
    needed.  The value is returned in this library's sign convention
    (``grad f + lam = 0``), i.e. the negated base gradient.
    """
    a = np.asarray(a, dtype=float)
    if a.sum() <= 0:
        raise ModelError("need sum(a) > 0")
    y = (R + predicted_aggregate) / a.sum()
    return float(-np.asarray(base.gradient(np.asarray(y))).item())


def aggregate_dual_terms(m: MultiplierVector, ineq_coef, eq_coef) -> AggregatedTerms:
    """Per-stage pairs ``(sum_j mu_j a~^t_j, sum_k lam_k b~^t_k)``.

    ``ineq_coef`` has shape ``(T, |M|)`` and ``eq_coef`` shape ``(T, |L|)``.
    """
    A = np.asarray(ineq_coef, dtype=float)
    B = np.asarray(eq_coef, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape[0] != B.shape[0]:
        raise ModelError("coefficient tables need shape (T, rows)")
    if A.shape[1] != m.mu.size or B.shape[1] != m.lam.size:
        raise ModelError("coefficient tables do not match the multiplier dimension")
    return AggregatedTerms(tuple(A @ m.mu), tuple(B @ m.lam))


def stage_coefficient_tables(instance):
    """``(T, |M|)`` and ``(T, |L|)`` coefficient tables of a one-dimensional instance."""
    if any(d != 1 for d in instance.dims):
        raise ModelError("coefficient tables need one-dimensional stages")
    c = instance.coupling
    A = c.A_ub.T if c.n_ub else np.zeros((instance.T, 0))
    B = c.A_eq.T if c.n_eq else np.zeros((instance.T, 0))
    return A, B
