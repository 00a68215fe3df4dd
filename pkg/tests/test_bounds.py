from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from oracles import close, hockey_stick_value, monolithic_value

from dpnoise.bounds import (InfeasibleBound, Schedule, binding_cuts, build_lower, build_upper, converge,
                            cutting_plane, solve_dependent_pair, solve_pair, staircase)
from dpnoise.loss import l1, l2, pinball
from dpnoise.partition import InvalidArgument, Partition, PrivacyBudget, uniform_partition
from dpnoise.separation import audit


def test_upper_model_is_a_bare_simplex():
    m = build_upper(uniform_partition(1, 1), PrivacyBudget(1, 0.1), l1())
    assert m.objective.tolist() == [0.5, 0.5, 1.5]
    assert m.n_rows == 1 and m.rows[0].sense == "=="


def test_lower_model_pads_by_one_sensitivity():
    m = build_lower(uniform_partition(1, 1), PrivacyBudget(1, 0.1), l1())
    assert m.objective.tolist() == [1, 0, 0, 1, 2]


@pytest.mark.parametrize("kind,value", [("upper", 0.5), ("lower", 0.0)])
def test_vacuous_delta_needs_no_cuts(kind, value):
    res = cutting_plane(kind, uniform_partition(1, 1), PrivacyBudget(1, 1.0), l1())
    assert res.objective == value
    assert res.iterations == 1 and res.cuts == [] and res.converged


def test_staircase_has_ten_cells_and_loss_two_and_a_half():
    s = staircase(0.1)
    assert s.partition.n_cells == 10
    assert l1().cell_coefficients(s.partition, "avg") @ s.weights == pytest.approx(2.5)


@pytest.mark.parametrize("eps", [0.0, 0.3, 1.0, 5.0])
@pytest.mark.parametrize("delta", [0.05, 0.1, 0.3, 0.49])
def test_staircase_is_private_for_any_epsilon(eps, delta):
    assert audit(staircase(delta), PrivacyBudget(eps, delta)).feasible


def test_staircase_rejects_delta_outside_unit_interval():
    with pytest.raises(InvalidArgument):
        staircase(1.0)


SMALL = [(1.0, 0.3, 2, 1), (0.5, 0.25, 2, 1), (2.0, 0.3, 3, 2), (0.2, 0.45, 1, 1),
         (3.0, 0.2, 4, 1)]


@pytest.mark.parametrize("eps,delta,L,k", SMALL)
@pytest.mark.parametrize("kind", ["upper", "lower"])
def test_cutting_plane_matches_monolithic_model(kind, eps, delta, L, k):
    b = PrivacyBudget(eps, delta)
    part = uniform_partition(L, k)
    res = cutting_plane(kind, part, b, l1())
    assert res.converged
    assert close(res.objective, monolithic_value(kind, part, b, l1()), 1e-9)


def test_cutting_plane_matches_monolithic_model_on_irregular_grid():
    b = PrivacyBudget(0.7, 0.15)
    part = Partition(Fraction(1), (-3, -1, 0, 1, 3))
    for kind in ("upper", "lower"):
        res = cutting_plane(kind, part, b, pinball(Fraction(3, 10)))
        assert close(res.objective, monolithic_value(kind, part, b, pinball(Fraction(3, 10))), 1e-9)


@pytest.mark.parametrize("eps,delta,L,k", [(1.0, 0.2, 16, 8), (0.5, 0.1, 12, 4), (3.0, 0.2, 9, 6)])
@pytest.mark.parametrize("kind", ["upper", "lower"])
def test_cutting_plane_matches_hockey_stick_model(kind, eps, delta, L, k):
    b = PrivacyBudget(eps, delta)
    part = uniform_partition(L, k)
    res = cutting_plane(kind, part, b, l1())
    assert res.converged
    assert close(res.objective, hockey_stick_value(kind, part, b, l1()), 1e-7)


@settings(max_examples=20)
@given(st.floats(0.0, 3.0), st.floats(0.02, 0.6), st.integers(0, 6), st.integers(1, 4),
       st.sampled_from([l1(), l2(), pinball(0.8)]))
def test_lower_never_exceeds_upper(eps, delta, L, k, loss):
    b = PrivacyBudget(eps, delta)
    try:
        pair = solve_pair(L, k, b, loss)
    except InfeasibleBound:  # too narrow a grid for this delta
        return
    assert pair.LB <= pair.UB + 1e-9
    assert audit(pair.upper.distribution, b).feasible


@pytest.mark.parametrize("eps,delta,Lp,k", [(1.0, 0.2, 2, 2), (0.5, 0.1, 3, 2), (2.0, 0.3, 2, 3)])
def test_finer_grid_with_wider_support_is_no_worse(eps, delta, Lp, k):
    b = PrivacyBudget(eps, delta)
    coarse = cutting_plane("upper", uniform_partition(Lp, 1), b, l1()).objective
    fine = cutting_plane("upper", uniform_partition(Lp * k + k - 1, k), b, l1()).objective
    assert fine <= coarse + 1e-9


def test_rounds_are_deterministic():
    b = PrivacyBudget(1.0, 0.2)
    runs = [cutting_plane("upper", uniform_partition(8, 4), b, l1()) for _ in range(2)]
    assert [v.key() for v in runs[0].cuts] == [v.key() for v in runs[1].cuts]
    assert runs[0].objective == runs[1].objective


def test_binding_cuts_are_tight_at_the_solution():
    b = PrivacyBudget(1.0, 0.2)
    res = cutting_plane("upper", uniform_partition(6, 2), b, l1())
    tight = binding_cuts(res)
    assert tight and set(v.key() for v in tight) <= set(v.key() for v in res.cuts)


def test_warm_started_lower_bound_reaches_the_same_value():
    b = PrivacyBudget(1.0, 0.2)
    part = uniform_partition(6, 2)
    up = cutting_plane("upper", part, b, l1())
    cold = cutting_plane("lower", part, b, l1())
    warm = cutting_plane("lower", part, b, l1(), initial_cuts=binding_cuts(up))
    assert warm.objective == pytest.approx(cold.objective, abs=1e-9)


def test_converge_reports_a_monotone_gap():
    sched = Schedule(radius=2, max_k=8, time_limit=60)
    pair = converge(PrivacyBudget(1.0, 0.2), l1(), target_gap=1e-6, schedule=sched)
    gaps = [h["best_gap"] for h in pair.history]
    assert all(a >= b for a, b in zip(gaps, gaps[1:]))
    assert pair.LB <= pair.UB


def test_converge_rejects_nonpositive_target():
    with pytest.raises(InvalidArgument):
        converge(PrivacyBudget(1.0, 0.2), l1(), target_gap=0.0)


@pytest.mark.parametrize("eps,delta,K", [(1.0, 0.2, 2), (0.5, 0.1, 3)])
def test_data_dependent_bound_is_at_most_the_independent_one(eps, delta, K):
    b = PrivacyBudget(eps, delta)
    L, k = 3, 1
    dep = solve_dependent_pair(0, K, L, k, b, l1())
    plain = cutting_plane("upper", uniform_partition(L, k), b, l1()).objective
    assert dep.UB <= plain + 1e-8
    assert dep.LB <= dep.UB + 1e-9


def test_one_output_cell_reduces_to_the_independent_problem():
    b = PrivacyBudget(1.0, 0.2)
    dep = solve_dependent_pair(0, 1, 4, 1, b, l1())
    plain = solve_pair(4, 1, b, l1())
    assert dep.UB == pytest.approx(plain.UB, abs=1e-9)
