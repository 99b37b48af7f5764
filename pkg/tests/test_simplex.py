import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from oddo.simplex import LPError, LPInfeasible, LPUnbounded, solve_lp


def test_single_binding_row():
    # min x  s.t.  x >= 1, x <= 2  written as -x <= -1, x <= 2
    res = solve_lp([1.0], A_ub=[[-1.0], [1.0]], b_ub=[-1.0, 2.0], lb=[-10.0], ub=[10.0])
    assert res.x.tolist() == [1.0]
    assert res.mu.tolist() == [1.0, 0.0]


def test_degenerate_redundant_equality_terminates():
    c = [-1.0, -1.0, 0.0]
    A_eq = [[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]
    A_ub = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]
    res = solve_lp(c, A_ub=A_ub, b_ub=[1.0, 1.0, 1.0], A_eq=A_eq, b_eq=[1.0, 2.0])
    assert res.objective == pytest.approx(-1.0)
    grad = np.asarray(c) + np.asarray(A_ub).T @ res.mu + np.asarray(A_eq).T @ res.lam - res.z_lower + res.z_upper
    assert np.allclose(grad, 0.0, atol=1e-9)
    assert np.all(res.mu >= -1e-12)


def test_deterministic_basis_and_duals():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(6, 4))
    args = dict(A_ub=A, b_ub=np.abs(rng.normal(size=6)) + 1, lb=np.full(4, -1.0), ub=np.full(4, 2.0))
    c = rng.normal(size=4)
    a, b = solve_lp(c, **args), solve_lp(c, **args)
    assert a.basis == b.basis
    assert a.mu.tobytes() == b.mu.tobytes() and a.x.tobytes() == b.x.tobytes()


def test_infeasible():
    with pytest.raises(LPInfeasible):
        solve_lp([1.0], A_ub=[[1.0], [-1.0]], b_ub=[1.0, -2.0], lb=[-5.0], ub=[5.0])


def test_unbounded():
    with pytest.raises(LPUnbounded):
        solve_lp([-1.0], lb=[0.0])


def test_infinite_lower_bound_rejected():
    with pytest.raises(LPError):
        solve_lp([1.0], lb=[-np.inf])


@given(st.integers(0, 100_000))
def test_random_lp_matches_highs(seed):
    rng = np.random.default_rng(seed)
    n, m_ub, m_eq = int(rng.integers(1, 7)), int(rng.integers(0, 7)), int(rng.integers(0, 3))
    x0 = rng.uniform(-1, 1, n)  # interior point keeps the LP feasible
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = A_ub @ x0 + rng.uniform(0, 1, m_ub)
    A_eq = rng.normal(size=(m_eq, n))
    b_eq = A_eq @ x0
    lb, ub = np.full(n, -2.0), np.full(n, 2.0)
    c = rng.normal(size=n)
    ours = solve_lp(c, A_ub, b_ub, A_eq, b_eq, lb, ub)
    ref = linprog(c, A_ub=A_ub if m_ub else None, b_ub=b_ub if m_ub else None, A_eq=A_eq if m_eq else None,
                  b_eq=b_eq if m_eq else None, bounds=list(zip(lb, ub)), method="highs")
    assert ref.status == 0
    assert ours.objective == pytest.approx(ref.fun, abs=1e-7)
    grad = c + A_ub.T @ ours.mu + A_eq.T @ ours.lam - ours.z_lower + ours.z_upper
    assert np.allclose(grad, 0.0, atol=1e-7)
    assert np.all(ours.mu >= -1e-12) and np.all(ours.z_lower >= -1e-12) and np.all(ours.z_upper >= -1e-12)
    assert np.all(np.abs(ours.mu * (A_ub @ ours.x - b_ub)) <= 1e-7)
