from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from oracles import random_family, random_instance

from dpnoise.distributions import DependentNoise, NoiseDistribution, point_mass
from dpnoise.partition import Event, InvalidArgument, Partition, PrivacyBudget, uniform_partition
from dpnoise.separation import (ORACLE_METHODS, audit, brute_force, brute_force_dependent,
                                dependent_shortfall_of, max_shortfall, max_shortfall_dependent,
                                shortfall_by_shift, shortfall_of)

LN2 = float(np.log(2))


@pytest.fixture
def three_cells():
    part = Partition(Fraction(1), (-1, 0, 1, 2))
    return NoiseDistribution(part, np.array([0.25, 0.5, 0.25]))


def test_shortfall_of_a_single_cell_event(three_cells):
    a = Event(((-1, 0),))
    assert shortfall_of(three_cells, 1, a, PrivacyBudget(LN2, 0.1)) == pytest.approx(0.15)
    assert shortfall_of(three_cells, 1, a, PrivacyBudget(LN2, 0.3)) == pytest.approx(-0.05)


def test_worst_constraint_of_the_three_cell_example(three_cells):
    b = PrivacyBudget(LN2, 0.1)
    worst = max_shortfall(three_cells, b)
    assert worst.shortfall == pytest.approx(0.15)
    # the mirror image is an equally bad constraint; the scan meets phi=-1 first
    assert (worst.phi, worst.event.segments) == (-1, ((1, 2),))
    assert shortfall_of(three_cells, 1, Event(((-1, 0),)), b) == pytest.approx(worst.shortfall)


def test_zero_shift_never_violates(three_cells):
    b = PrivacyBudget(0.0, 0.01)
    for a in [Event(((-1, 2),)), Event(((0, 1),)), Event(((-1, 0), (1, 2)))]:
        assert shortfall_of(three_cells, 0, a, b) <= -0.01 + 1e-15


def test_empty_event_costs_exactly_delta(three_cells):
    assert shortfall_of(three_cells, 1, Event(()), PrivacyBudget(1, 0.2)) == -0.2


def test_point_mass_is_maximally_unsafe():
    b = PrivacyBudget(1.0, 0.1)
    pm = point_mass(uniform_partition(1, 1), 1, b)
    worst = max_shortfall(pm, b)
    assert worst.shortfall == pytest.approx(0.9)
    assert not audit(pm, b).feasible


def test_uniform_over_wide_support_passes_audit():
    b = PrivacyBudget(1.0, 0.2)
    part = uniform_partition(6, 1)
    dist = NoiseDistribution(part, np.full(part.n_cells, 1 / part.n_cells))
    res = audit(dist, b)
    assert res.feasible and res.worst.shortfall <= 0


def test_shift_must_stay_within_sensitivity(three_cells):
    with pytest.raises(InvalidArgument):
        shortfall_of(three_cells, 2, Event(((0, 1),)), PrivacyBudget(1, 0.1))
    with pytest.raises(InvalidArgument):
        max_shortfall(three_cells, PrivacyBudget(1, 0.1), method="greedy")


def test_brute_force_refuses_wide_universes():
    part = uniform_partition(12, 1)
    dist = NoiseDistribution(part, np.full(part.n_cells, 1 / part.n_cells))
    with pytest.raises(InvalidArgument):
        brute_force(dist, PrivacyBudget(1, 0.1))


def test_violation_serialises():
    b = PrivacyBudget(1.0, 0.1)
    v = max_shortfall(point_mass(uniform_partition(1, 1), 0, b), b)
    assert '"phi_units"' in v.to_json() and v.to_dict()["segments"]


def test_dependent_family_with_one_member_is_the_plain_oracle(three_cells):
    b = PrivacyBudget(LN2, 0.1)
    fam = DependentNoise(three_cells.partition, three_cells.weights[None, :], 0)
    dep = max_shortfall_dependent(fam, b, offsets=(-1, 0, 1))
    assert dep.shortfall == pytest.approx(max_shortfall(three_cells, b).shortfall)


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=80)
@given(seeds)
def test_fast_oracle_matches_brute_force(seed):
    dist, b = random_instance(np.random.default_rng(seed))
    fast = max_shortfall(dist, b)
    ref = brute_force(dist, b)
    assert fast.shortfall == pytest.approx(ref.shortfall, abs=1e-12)
    assert (fast.phi, fast.event) == (ref.phi, ref.event)
    assert shortfall_of(dist, fast.phi, fast.event, b) == pytest.approx(fast.shortfall, abs=1e-12)


@settings(max_examples=40)
@given(seeds)
def test_oracle_methods_agree(seed):
    dist, b = random_instance(np.random.default_rng(seed))
    runs = [shortfall_by_shift(dist, b, method=m) for m in ORACLE_METHODS]
    for other in runs[1:]:
        assert [v.phi for v in other] == [v.phi for v in runs[0]]
        for v, w in zip(runs[0], other):
            assert v.shortfall == pytest.approx(w.shortfall, abs=1e-12)


@settings(max_examples=40)
@given(seeds)
def test_mirrored_distribution_has_the_same_worst_shortfall(seed):
    dist, b = random_instance(np.random.default_rng(seed))
    part = dist.partition
    flipped = Partition(part.beta, tuple(-x for x in reversed(part.breakpoints)))
    universe = None if dist.universe is None else (-dist.universe[1], -dist.universe[0])
    mirror = NoiseDistribution(flipped, dist.weights[::-1].copy(), universe=universe)
    assert max_shortfall(mirror, b).shortfall == pytest.approx(
        max_shortfall(dist, b).shortfall, abs=1e-12)


@settings(max_examples=30)
@given(seeds)
def test_parallel_scan_is_deterministic(seed):
    dist, b = random_instance(np.random.default_rng(seed))
    assert max_shortfall(dist, b, jobs=3) == max_shortfall(dist, b, jobs=1)


@settings(max_examples=30)
@given(seeds)
def test_dependent_oracle_matches_brute_force(seed):
    fam, b = random_family(np.random.default_rng(seed))
    for offsets in [(-1, 0, 1), (0,)]:
        try:
            fast = max_shortfall_dependent(fam, b, offsets)
        except InvalidArgument:
            continue
        ref = brute_force_dependent(fam, b, offsets)
        assert fast.shortfall == pytest.approx(ref.shortfall, abs=1e-12)
        got = dependent_shortfall_of(fam, fast.k, fast.m, fast.phi, fast.event, b)
        assert got == pytest.approx(fast.shortfall, abs=1e-12)
