import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oddo.model import ModelError, MultiplierVector, Power, check_feasibility
from oddo.offline import solve_offline, solve_rap
from oddo.predictors import (aggregate_dual_terms, aggregate_rap_predictor, candidate, nominal_parameters,
                             nominal_strategy, stage_coefficient_tables)
from oddo.problems import (IMParams, battery_instance, battery_multipliers, example_e, generate_battery_instance,
                           generate_im_instance, im_instance, BatteryParams)


def mv(mu, lam):
    return MultiplierVector(mu, lam)


def test_mean_of_two():
    m = candidate([mv([1.0], [2.0]), mv([3.0], [4.0])], "mean")
    assert m.mu.tolist() == [2.0] and m.lam.tolist() == [3.0]


@pytest.mark.parametrize("kind", ["min", "max", "mean", "median"])
def test_single_history_element(kind):
    h = mv([0.5, 2.0], [-1.0])
    m = candidate([h], kind)
    assert m.to_array().tolist() == h.to_array().tolist()


def test_median_componentwise():
    H = [mv([0.0], [0.0]), mv([1.0], [10.0]), mv([2.0], [2.0])]
    m = candidate(H, "median")
    assert (m.mu[0], m.lam[0]) == (1.0, 2.0)


def test_median_even_history_averages_middle_pair():
    H = [mv([v], []) for v in (4.0, 1.0, 3.0, 2.0)]
    assert candidate(H, "median").mu[0] == 2.5


def test_candidate_errors():
    with pytest.raises(ModelError):
        candidate([], "mean")
    with pytest.raises(ModelError):
        candidate([mv([1.0], [])], "mode")
    with pytest.raises(ModelError):
        candidate([mv([1.0], []), mv([1.0, 2.0], [])], "mean")


histories = st.integers(1, 4).flatmap(lambda n: st.lists(
    st.tuples(st.lists(st.floats(0, 50), min_size=n, max_size=n), st.lists(st.floats(-50, 50), min_size=2,
                                                                           max_size=2)),
    min_size=1, max_size=8))


@given(histories)
def test_candidate_ordering(raw):
    H = [mv(mu, lam) for mu, lam in raw]
    lo, med, hi, mean = (candidate(H, k).to_array() for k in ("min", "median", "max", "mean"))
    tol = 1e-9 * (1 + np.abs(hi))
    assert np.all(lo <= med + tol) and np.all(med <= hi + tol)
    assert np.all(lo <= mean + tol) and np.all(mean <= hi + tol)


def test_nominal_parameters_examples():
    p = np.array([1.0, -2.0, 3.5])
    assert nominal_parameters([p, p]).tolist() == p.tolist()
    assert nominal_parameters([[0.0, 2.0], [2.0, 0.0]]).tolist() == [1.0, 1.0]
    rng = np.random.default_rng(0)
    P = [rng.uniform(size=(24, 3)) for _ in range(3)]
    assert nominal_parameters(P) == pytest.approx((P[0] + P[1] + P[2]) / 3, abs=1e-15)
    with pytest.raises(ModelError):
        nominal_parameters([])
    with pytest.raises(ModelError):
        nominal_parameters([[1.0], [1.0, 2.0]])


def test_nominal_with_perfect_information_battery():
    test = generate_battery_instance(0, 4)
    x, m, sol = nominal_strategy(test, [test.structure.p], lambda inst, p: battery_instance(inst.structure, p))
    assert x == pytest.approx(solve_offline(test).x_star, abs=1e-9)


def test_nominal_with_perfect_information_im():
    test = generate_im_instance(11)
    x, _, _ = nominal_strategy(test, [test.structure.c], lambda inst, c: im_instance(IMParams(c)))
    assert float(np.concatenate([f.c for f in test.costs]) @ x) == pytest.approx(solve_offline(test).objective,
                                                                                 rel=1e-12)


def test_nominal_decision_feasible_on_test_instance():
    test = generate_battery_instance(1, 10)
    P = [generate_battery_instance(1, d).structure.p for d in range(5)]
    x, _, _ = nominal_strategy(test, P, lambda inst, p: battery_instance(inst.structure, p))
    assert check_feasibility(test, x, tol=1e-8).feasible


def test_aggregate_rap_example_e():
    # E in scaled-shifted form: a = 1, b = Y/2, base y^2
    lam = aggregate_rap_predictor(10.0, [1, 1, 1], sum(np.array([-4.0, 1.0, -5.0]) / 2), Power(1.0, 2.0))
    assert lam == pytest.approx(-4.0, abs=1e-12)
    assert lam == pytest.approx(solve_rap(example_e().costs, np.zeros(3), np.full(3, 6.0), 10.0).lam, abs=1e-9)


def test_aggregate_rap_at_zero():
    base = Power(1.3, 2.5)
    assert aggregate_rap_predictor(7.0, [1.0, 2.0], -7.0, base) == pytest.approx(-float(base.gradient(0.0)))


def test_aggregate_rap_exact_aggregate_matches_solver():
    from oddo.model import ScaledShifted
    base = Power(0.8, 3.0)
    a = np.array([1.0, 2.0, 0.5, 1.5])
    b = np.array([0.2, 0.4, 0.1, 0.3])
    costs = [ScaledShifted(base, [ai], [bi]) for ai, bi in zip(a, b)]
    R = 6.0
    res = solve_rap(costs, np.zeros(4), np.full(4, 100.0), R)
    assert np.all(res.x > 0) and np.all(res.x < 100)
    assert aggregate_rap_predictor(R, a, float(a @ b), base) == pytest.approx(res.lam, abs=1e-8)


def test_aggregate_dual_terms_single_equality():
    agg = aggregate_dual_terms(mv([], [2.5]), np.zeros((3, 0)), np.ones((3, 1)))
    assert [float(v[0]) for v in agg.eq] == [2.5, 2.5, 2.5]


def test_aggregate_dual_terms_zero():
    agg = aggregate_dual_terms(mv([0.0, 0.0], [0.0]), np.ones((2, 2)), np.ones((2, 1)))
    assert all(float(v[0]) == 0.0 for v in agg.ineq + agg.eq)


def test_aggregate_dual_terms_battery():
    params = BatteryParams(3, 1.0, -2.0, 2.0, [-5.0, -5.0], [5.0, 5.0], 0.0)
    inst = battery_instance(params, [0.0, 0.0, 0.0])
    m = battery_multipliers(mu_minus=[0.0, 1.0], mu_plus=[1.0, 0.0], lam=2.0)
    agg = aggregate_dual_terms(m, *stage_coefficient_tables(inst))
    total = [float(a[0] + b[0]) for a, b in zip(agg.ineq, agg.eq)]
    # sum over s >= t of (mu_plus - mu_minus) plus lambda
    assert total == [2.0, 1.0, 2.0]


def test_aggregate_dual_terms_shape_errors():
    with pytest.raises(ModelError):
        aggregate_dual_terms(mv([1.0], [1.0]), np.ones((3, 2)), np.ones((3, 1)))
    with pytest.raises(ModelError):
        aggregate_dual_terms(mv([1.0], [1.0]), np.ones((3, 1)), np.ones((2, 1)))
