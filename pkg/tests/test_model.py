import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oddo.model import (CouplingConstraints, DomainError, Exponential, LaminarFamily, Linear, ModelError,
                        MultiplierVector, Power, ProblemInstance, Quadratic, ScaledShifted, Square, StageSet,
                        check_feasibility, cost_from_dict, embed_laminar, evaluate_objective, submodularity_check,
                        tight_sets, tight_sets_closed)
from oddo.problems import example_e


def test_example_e_objective_at_offline_optimum():
    assert evaluate_objective(example_e(), [4.0, 1.5, 4.5]) == pytest.approx(1.5, abs=1e-12)


def test_example_e_objective_at_online_solution():
    # (1-4) + (9+3) + (36-30)
    assert evaluate_objective(example_e(), [1.0, 3.0, 6.0]) == pytest.approx(15.0, abs=1e-12)


def test_zero_costs_give_zero_objective():
    zero = example_e().with_costs([Linear([0.0]) for _ in range(3)])
    assert evaluate_objective(zero, [2.0, 3.0, 5.0]) == 0.0


def test_objective_dimension_mismatch():
    with pytest.raises(ModelError):
        evaluate_objective(example_e(), [1.0, 2.0])


def test_feasibility_examples():
    inst = example_e()
    assert check_feasibility(inst, [1, 3, 6], tol=1e-9).feasible
    rep = check_feasibility(inst, [0, 0, 0], tol=1e-9)
    assert not rep.feasible and rep.eq_violation.tolist() == [10.0]
    rep = check_feasibility(inst, [7, 2, 1], tol=1e-9)
    assert not rep.feasible and rep.box_violation.tolist() == [1.0, 0.0, 0.0]


def _toy_family():
    # stages 0,1,2; battery-style cumulative capacities on a T=3 toy
    return LaminarFamily(3, [{0}, {1}, {2}, {0, 1}], [2.0, 2.0, 2.0, 4.0], 3.0, [-2, -2, -2], [2, 2, 2])


def test_embed_laminar_counts_rows():
    inst = embed_laminar(_toy_family(), [Quadratic([0.0]) for _ in range(3)])
    assert inst.coupling.n_ub == 4
    assert inst.coupling.n_eq == 1


def test_singleton_family_is_rap():
    fam = LaminarFamily(3, [], [], 10.0, [0, 0, 0], [6, 6, 6])
    inst = embed_laminar(fam, example_e().costs)
    assert inst.coupling.n_ub == 0 and inst.coupling.n_eq == 1
    assert np.allclose(inst.coupling.A_eq, 1.0)


def test_embed_laminar_rejects_empty_costs():
    with pytest.raises(ModelError):
        embed_laminar(_toy_family(), [])


def test_non_laminar_family_rejected():
    with pytest.raises(ModelError):
        LaminarFamily(3, [{0, 1}, {1, 2}], [1.0, 1.0], 1.0, [0, 0, 0], [1, 1, 1])


def test_embedded_laminar_has_feasible_point():
    from oddo.offline import solve_offline

    inst = embed_laminar(_toy_family(), [Quadratic([p]) for p in (0.3, -1.0, 0.5)])
    sol = solve_offline(inst)
    assert check_feasibility(inst, sol.x_star).feasible


def test_submodularity_examples():
    assert submodularity_check(lambda X: min(len(X), 2), 5)
    assert not submodularity_check(lambda X: len(X) ** 2, 4)
    w = [0.5, -2.0, 3.0, 1.0]
    assert submodularity_check(lambda X: sum(w[t] for t in X), 4)


def test_submodularity_needs_zero_at_empty_set():
    assert not submodularity_check(lambda X: 1.0 + len(X), 3)


def test_laminar_rank_is_submodular():
    fam = _toy_family()
    assert submodularity_check(fam.set_function(), 3)


def test_tight_sets_closed_on_optimum():
    from oddo.offline import solve_offline

    fam = _toy_family()
    sol = solve_offline(embed_laminar(fam, [Quadratic([p]) for p in (-1.5, -1.5, 0.0)]))
    r = fam.set_function()
    tight = tight_sets(r, sol.x_star, 3, tol=1e-8)
    assert frozenset({0, 1, 2}) in tight
    assert tight_sets_closed(r, sol.x_star, 3, tol=1e-8)


def test_multiplier_vector_rejects_negative_mu():
    with pytest.raises(ModelError):
        MultiplierVector([-0.1], [])


def test_multiplier_roundtrip():
    m = MultiplierVector([0.5, 0.0], [-1.25])
    assert MultiplierVector.from_dict(m.to_dict()).to_array().tolist() == m.to_array().tolist()
    assert MultiplierVector.from_array(m.to_array(), 2).to_array().tolist() == m.to_array().tolist()


def test_stage_set_validation():
    with pytest.raises(ModelError):
        StageSet([1.0], [0.0])
    with pytest.raises(ModelError):
        StageSet([0.0], [np.inf])


def test_instance_validation():
    with pytest.raises(ModelError):
        ProblemInstance((Quadratic([0.0]),), (StageSet([0, 0], [1, 1]),), CouplingConstraints.empty(2))


@pytest.mark.parametrize("f", [Quadratic([0.3, -1.0]), ScaledShifted(Power(1.3, 2.5), [2.0], [0.5]),
                               ScaledShifted(Exponential(0.7), [1.5, 0.5], [0.0, -1.0]), Linear([1.0, 2.0])])
def test_cost_dict_roundtrip(f):
    g = cost_from_dict(f.to_dict())
    x = np.full(f.dim, 0.8)
    assert g.value(x) == f.value(x)


@given(st.floats(-50, 50), st.floats(-5, 5))
def test_quadratic_inverse_gradient_roundtrip(x, p):
    f = Quadratic([p])
    assert f.inverse_gradient(f.gradient([x]))[0] == pytest.approx(x, abs=1e-10)


@given(st.floats(0.0, 20.0), st.floats(0.2, 3.0), st.floats(1.2, 4.0), st.floats(0.3, 3.0), st.floats(-2, 2))
def test_power_inverse_gradient_roundtrip(y, K, c, a, b):
    f = ScaledShifted(Power(K, c), [a], [b])
    x = a * (y - b)
    assert f.inverse_gradient(f.gradient([x]))[0] == pytest.approx(x, abs=1e-10 * max(1.0, abs(x)))


@given(st.floats(-10, 10), st.floats(0.2, 3.0), st.floats(0.3, 3.0), st.floats(-2, 2))
def test_exponential_inverse_gradient_roundtrip(x, K, a, b):
    f = ScaledShifted(Exponential(K), [a], [b])
    assert f.inverse_gradient(f.gradient([x]))[0] == pytest.approx(x, abs=1e-10 * max(1.0, abs(x)))


def test_exponential_inverse_domain():
    f = ScaledShifted(Exponential(1.0), [1.0], [0.0])
    with pytest.raises(DomainError):
        f.inverse_gradient([0.0])


def test_square_base():
    s = Square()
    assert s.value(3.0) == 9.0 and s.gradient(3.0) == 6.0 and s.inverse_gradient(6.0) == 3.0


def test_linear_has_no_inverse():
    with pytest.raises(DomainError):
        Linear([1.0]).inverse_gradient([0.0])


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_clipped_inverse_is_box_minimizer(nu):
    f = ScaledShifted(Exponential(1.0), [1.0, 2.0, 0.5], [0.0, 0.5, -0.5])
    lo, hi = np.array([-1.0, -2.0, 0.0]), np.array([1.0, 0.5, 2.0])
    x = f.clipped_inverse_gradient(np.asarray(nu), lo, hi)
    grid = np.linspace(lo, hi, 401)
    vals = [[f.value(np.where(np.arange(3) == i, g[i], x)) - np.dot(nu, np.where(np.arange(3) == i, g[i], x))
             for g in grid] for i in range(3)]
    best = min(min(v) for v in vals)
    assert f.value(x) - np.dot(nu, x) <= best + 1e-9


def test_all_subsets_helper_is_exhaustive():
    # the brute-force helpers enumerate 2^T subsets
    subsets = [frozenset(c) for k in range(4) for c in itertools.combinations(range(3), k)]
    assert len(subsets) == 8
