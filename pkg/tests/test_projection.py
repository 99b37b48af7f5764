import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from oddo.model import ModelError
from oddo.problems import BatteryParams, battery_instance, example_e, random_battery_toy
from oddo.projection import (AffineSystem, InfeasiblePrefix, StageInterval, battery_projection_bounds,
                             battery_stage_interval, fme_eliminate, has_feasible_completion, lp_stage_interval,
                             project_onto_stage)


def _interval_of(system):
    """Bounds on the single remaining variable of a system."""
    a, b = system.A[:, 0], system.b
    lo = max([bi / ai for ai, bi in zip(a, b) if ai < 0], default=-np.inf)
    hi = min([bi / ai for ai, bi in zip(a, b) if ai > 0], default=np.inf)
    return lo, hi


def test_fme_substitutes_equality():
    sys_ = AffineSystem.from_rows([[0, 1], [0, -1]], [6, 0], [[1, 1]], [10])
    out = fme_eliminate(sys_, 1)
    assert out.variables == (0,)
    assert _interval_of(out) == (4.0, 10.0)


def test_fme_without_variable_is_identity():
    sys_ = AffineSystem.from_rows([[1.0]], [2.0])
    assert fme_eliminate(sys_, 5) is sys_


def test_fme_infeasible_certificate():
    sys_ = AffineSystem.from_rows([[1.0], [-1.0]], [1.0, -2.0])
    out = fme_eliminate(sys_, 0)
    assert out.A.shape == (1, 0)
    assert out.b.tolist() == [-1.0]
    assert out.trivial_violations().tolist() == [0]
    assert out.describe_origin(0) == "rows 0, 1"


@given(st.integers(0, 10_000))
def test_fme_preserves_projection(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    m = int(rng.integers(n, 2 * n + 3))
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.5, 2.0, m)
    box = np.vstack([np.eye(n), -np.eye(n)])
    A, b = np.vstack([A, box]), np.concatenate([b, np.full(2 * n, 3.0)])
    out = fme_eliminate(AffineSystem(A, b, tuple(range(n))), n - 1)
    for _ in range(25):
        p = rng.uniform(-3.5, 3.5, n - 1)
        # oracle: is there x_{n-1} with A [p, x] <= b ?
        res = linprog([0.0], A_ub=A[:, -1:], b_ub=b - A[:, :-1] @ p, bounds=[(None, None)], method="highs")
        inside = res.status == 0
        slack = np.min(out.b - out.A @ p) if out.n_rows else np.inf
        if abs(slack) > 1e-7:  # skip points on the boundary
            assert (slack > 0) == inside


def test_project_example_e_first_stage():
    iv = project_onto_stage(example_e(), [], 0)
    assert (iv.lo, iv.hi) == (0.0, 6.0)


def test_project_example_e_second_stage():
    iv = project_onto_stage(example_e(), [np.array([1.0])], 1)
    assert (iv.lo, iv.hi) == (3.0, 6.0)


def test_project_example_e_last_stage():
    iv = project_onto_stage(example_e(), [np.array([1.0]), np.array([3.0])], 2)
    assert (iv.lo, iv.hi) == (6.0, 6.0)


def test_project_infeasible_prefix():
    with pytest.raises(InfeasiblePrefix, match="total|eq|lo="):
        project_onto_stage(example_e(), [np.array([6.0]), np.array([6.0])], 2)


def test_lp_interval_agrees_on_example_e():
    iv = lp_stage_interval(example_e(), [np.array([1.0])], 1)
    assert iv.lo == pytest.approx(3.0) and iv.hi == pytest.approx(6.0)


def _toy():
    return BatteryParams(3, 1.0, -2.0, 2.0, [-5.0, -5.0], [5.0, 5.0], 0.0)


def test_battery_recursion_toy():
    b = battery_projection_bounds(_toy())
    assert b.lo.tolist() == [-4.0, -2.0, 0.0]
    assert b.hi.tolist() == [4.0, 2.0, 0.0]


def test_battery_recursion_matches_lp_backward_band():
    # independent oracle: energy levels after stage t from which the terminal
    # target stays reachable; variables (e, x_{t+1}, ..., x_{T-1})
    p = _toy()
    b = battery_projection_bounds(p)
    T = p.T
    for t in range(T):
        k = T - t
        L = np.tril(np.ones((k, k)))  # row s: e + x_{t+1} + ... + x_{t+s}
        soc = L[: k - 1] if t < T - 1 else np.zeros((0, k))
        A_ub = np.vstack([soc, -soc])
        b_ub = np.concatenate([p.C_hi[t:], -p.C_lo[t:]])
        bounds = [(None, None)] + [(p.l[s], p.u[s]) for s in range(t + 1, T)]
        kw = dict(A_ub=A_ub if A_ub.size else None, b_ub=b_ub if A_ub.size else None,
                  A_eq=L[-1:], b_eq=[p.C_end], bounds=bounds, method="highs")
        c = np.zeros(k)
        c[0] = 1.0
        lo = linprog(c, **kw).fun
        hi = -linprog(-c, **kw).fun
        assert (lo, hi) == pytest.approx((b.lo[t], b.hi[t]), abs=1e-9)


def test_battery_recursion_with_huge_rates():
    p = BatteryParams(4, 1.0, -1e12, 1e12, [-1.0, -2.0, -3.0], [1.0, 2.0, 3.0], 0.0)
    b = battery_projection_bounds(p)
    assert b.lo[:3].tolist() == [-1.0, -2.0, -3.0]
    assert b.hi[:3].tolist() == [1.0, 2.0, 3.0]


def test_battery_terminal_out_of_reach():
    with pytest.raises(ModelError):
        battery_projection_bounds(BatteryParams(3, 1.0, -1.0, 1.0, [-5.0, -5.0], [5.0, 5.0], 10.0))


def test_battery_stage_interval_first_stage():
    b = battery_projection_bounds(_toy())
    iv = battery_stage_interval(0, 0.0, b, -2.0, 2.0, 1.0)
    assert (iv.lo, iv.hi) == (-2.0, 2.0)


def test_battery_stage_interval_band_edge():
    b = battery_projection_bounds(_toy())
    # energy 4 after stage 0: stage 1 must discharge to at most 2
    iv = battery_stage_interval(1, 4.0, b, -2.0, 2.0, 1.0)
    assert (iv.lo, iv.hi) == (-2.0, -2.0)


def test_battery_stage_interval_last_stage_pinned():
    b = battery_projection_bounds(_toy())
    iv = battery_stage_interval(2, 1.5, b, -2.0, 2.0, 1.0)
    assert (iv.lo, iv.hi) == (-1.5, -1.5)


@given(st.integers(0, 5_000))
def test_battery_recursion_equals_fme_and_completion(seed):
    rng = np.random.default_rng(seed)
    p = random_battery_toy(rng, T_range=(2, 6))
    inst = battery_instance(p, p.p)
    b = battery_projection_bounds(p)
    prefix, energy = [], 0.0
    for t in range(p.T):
        rec = battery_stage_interval(t, energy, b, p.l[t], p.u[t], p.dt)
        fme = project_onto_stage(inst, prefix, t)
        assert fme.lo == pytest.approx(rec.lo, abs=1e-9) and fme.hi == pytest.approx(rec.hi, abs=1e-9)
        x = rng.uniform(rec.lo, rec.hi) if rec.width > 0 else rec.lo
        assert has_feasible_completion(inst, prefix + [np.array([x])])
        if rec.lo - 1e-6 >= p.l[t] - 1e-6:
            assert not has_feasible_completion(inst, prefix + [np.array([rec.lo - 1e-6])])
        prefix.append(np.array([x]))
        energy += p.dt * x


def test_interval_helpers():
    iv = StageInterval(1.0, 3.0)
    assert iv.clip(5.0) == 3.0 and iv.clip(-1.0) == 1.0 and iv.contains(2.0) and iv.width == 2.0
