from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpnoise.partition import (Event, InvalidArgument, Partition, PrivacyBudget, as_fraction,
                               event_cell_overlaps, geometric_partition, overlap,
                               overlap_units, pad, refine, uniform_partition)


def test_uniform_one_cell_per_unit():
    p = uniform_partition(1, 1, 1)
    assert p.breakpoints == (-1, 0, 1, 2)
    assert p.beta == 1
    assert [p.cell_real(j) for j in range(3)] == [(-1, 0), (0, 1), (1, 2)]


def test_uniform_half_width_cells():
    p = uniform_partition(2, 2, 1)
    assert p.beta == Fraction(1, 2)
    assert p.n_cells == 5
    assert p.cell_real(0)[0] == -1 and p.cell_real(4)[1] == Fraction(3, 2)


def test_uniform_zero_radius_is_single_cell():
    p = uniform_partition(0, 1, 1)
    assert p.n_cells == 1 and p.cell_real(0) == (0, 1)


@pytest.mark.parametrize("L,k", [(-1, 1), (1, 0), (1.5, 1)])
def test_uniform_rejects_bad_arguments(L, k):
    with pytest.raises(InvalidArgument):
        uniform_partition(L, k)


def test_partition_rejects_unsorted_breakpoints():
    with pytest.raises(InvalidArgument):
        Partition(Fraction(1), (0, 2, 1))
    with pytest.raises(InvalidArgument):
        Partition(Fraction(1), (0,))


def test_refine_by_two():
    p = refine(uniform_partition(1, 1), 2)
    assert p.breakpoints == (-2, -1, 0, 1, 2, 3, 4)
    assert p.beta == Fraction(1, 2)


def test_refine_by_one_is_identity():
    p = geometric_partition(6, 2)
    assert refine(p, 1) == p


def test_pad_matches_lower_bound_index_set():
    assert pad(uniform_partition(1, 1), 1).breakpoints == (-2, -1, 0, 1, 2, 3)


def test_pad_then_drop_padding_restores_support():
    p = uniform_partition(3, 2)
    q = pad(p, 4)
    assert q.n_cells == p.n_cells + 8
    assert q.breakpoints[4:-4] == p.breakpoints


def test_overlap_examples():
    p = uniform_partition(1, 1)
    assert overlap(p, 0, Event(((0, 2),)), shift=1) == 1
    assert overlap(p, 0, Event(((5, 6),)), shift=0) == 0
    assert overlap(p, 1, Event(((0, 1),))) == p.beta
    with pytest.raises(InvalidArgument):
        overlap(p, 3, Event(((0, 1),)))


def test_overlap_is_exact_rational():
    p = uniform_partition(3, 3, Fraction(70, 194))
    v = overlap(p, 2, Event(((-2, 5),)))
    assert isinstance(v, Fraction) and v == Fraction(70, 194) / 3


def test_events_normalise():
    e = Event(((3, 4), (0, 2), (2, 3), (6, 6)))
    assert e.segments == ((0, 4),)
    assert Event(()).is_empty()
    assert e.scaled(2).segments == ((0, 8),)
    assert e.shifted(-1).segments == ((-1, 3),)
    assert e.intersect_interval(1, 2).segments == ((1, 2),)


def test_budget_domain():
    with pytest.raises(InvalidArgument):
        PrivacyBudget(-1, 0.1)
    with pytest.raises(InvalidArgument):
        PrivacyBudget(1, 0)
    with pytest.raises(InvalidArgument):
        PrivacyBudget(1, 1.5).check_strict()
    assert PrivacyBudget(1, 0.1, 0.5).delta_f == Fraction(1, 2)


def test_as_fraction_reads_decimal_and_ratio_strings():
    assert as_fraction("70/194") == Fraction(35, 97)
    assert as_fraction(0.1) == Fraction(1, 10)
    with pytest.raises(InvalidArgument):
        as_fraction(float("nan"))


def test_beta_must_divide_sensitivity():
    p = Partition(Fraction(1, 3), (0, 1, 2))
    assert p.units_per(1) == 3
    with pytest.raises(InvalidArgument):
        p.units_per(Fraction(1, 2))


def test_geometric_partition_is_mirror_symmetric_and_capped():
    p = geometric_partition(64, 4, core_units=4, max_width=8)
    bps = set(p.breakpoints)
    assert bps == {1 - b for b in bps}
    assert p.widths.max() <= 8
    assert p.lo == -64 and p.hi == 65


def test_json_round_trip():
    p = geometric_partition(12, 3)
    assert Partition.from_dict(p.to_dict()) == p


segments = st.lists(st.tuples(st.integers(-12, 12), st.integers(0, 6)), max_size=5).map(
    lambda xs: Event(tuple((a, a + w) for a, w in xs)))
partitions = st.lists(st.integers(1, 4), min_size=1, max_size=8).flatmap(
    lambda ws: st.integers(-10, 5).map(
        lambda start: Partition(Fraction(1, 2), tuple(np.cumsum([start] + ws).tolist()))))


@given(partitions, segments, st.integers(-6, 6))
def test_vectorised_overlaps_match_scalar(p, a, shift):
    fast = event_cell_overlaps(p.bp_array, a, shift)
    slow = [overlap_units(p, j, a, shift) for j in range(p.n_cells)]
    assert fast.tolist() == slow


@given(partitions)
def test_overlaps_of_full_support_add_to_its_measure(p):
    total = sum(overlap(p, j, p.support()) for j in range(p.n_cells))
    assert total == (p.hi - p.lo) * p.beta


@given(partitions, st.integers(1, 4), st.integers(1, 3))
def test_pad_and_refine_commute(p, k, t):
    assert pad(refine(p, k), t * k) == refine(pad(p, t), k)


@given(partitions, st.integers(1, 3), st.integers(1, 3))
def test_refine_composes(p, a, b):
    assert refine(refine(p, a), b) == refine(p, a * b)


@given(segments)
def test_normal_form_segments_are_sorted_disjoint(a):
    for (s0, e0), (s1, e1) in zip(a.segments, a.segments[1:]):
        assert s0 < e0 < s1 < e1
