from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy import integrate

from dpnoise.loss import capped_linear, custom, l1, l2, parse_loss, pinball
from dpnoise.partition import InvalidArgument, uniform_partition


def test_l1_cell_average():
    assert l1().avg_coeff(0, 1) == 0.5
    assert l1().avg_coeff(1, Fraction(3, 2)) == 1.25


def test_l2_cell_average():
    assert l2().avg_coeff(-1, 0) == pytest.approx(1 / 3, abs=1e-15)


def test_cell_infima():
    assert l1().inf_coeff(0, 1) == 0
    assert l1().inf_coeff(1, 1.5) == 1
    assert l2().inf_coeff(-2, -1) == 1


def test_capped_linear_branches():
    c = capped_linear(1, 1000)
    assert c(0.5) == 0.5
    assert c(2) == 1001
    assert c(-2) == 1001
    assert c(1) == 1 == c(-1)


def test_capped_linear_domain():
    with pytest.raises(InvalidArgument):
        capped_linear(0, 1000)
    with pytest.raises(InvalidArgument):
        capped_linear(1, 1)


def test_pinball_is_asymmetric():
    c = pinball(0.9)
    assert c(1) == pytest.approx(0.9)
    assert c(-1) == pytest.approx(0.1)
    assert c.avg_coeff(0, 2) == pytest.approx(0.9)


@pytest.mark.parametrize("spec", ["l1", "l2", "pinball:0.9", "capped:1:1000"])
def test_spec_strings_round_trip(spec):
    assert parse_loss(spec).spec() == spec


@pytest.mark.parametrize("spec", ["l3", "pinball", "pinball:1.5", "capped:1", "capped:a:b"])
def test_bad_spec_strings(spec):
    with pytest.raises(InvalidArgument):
        parse_loss(spec)


def test_coefficients_follow_the_grid():
    part = uniform_partition(1, 1)
    assert l1().cell_coefficients(part, "avg").tolist() == [0.5, 0.5, 1.5]


def test_custom_loss_matches_builtin_l1():
    c = custom(abs, radius=1.0)
    for a, b in [(-2.0, -1.5), (-0.25, 0.5), (3.0, 3.125)]:
        assert c.avg_coeff(a, b) == pytest.approx(l1().avg_coeff(a, b), abs=1e-10)
        assert c.inf_coeff(a, b) == pytest.approx(l1().inf_coeff(a, b), abs=1e-9)


def test_custom_loss_must_be_nonnegative():
    with pytest.raises(InvalidArgument):
        custom(lambda x: x, radius=1.0)


def test_custom_loss_radius_hint_is_probed():
    with pytest.raises(InvalidArgument):
        custom(lambda x: abs(np.sin(x)), radius=1.0)


losses = st.sampled_from([l1(), l2(), pinball(Fraction(3, 10)), capped_linear(1, 50)])
cells = st.tuples(st.fractions(-6, 6, max_denominator=16),
                  st.fractions(Fraction(1, 16), 3, max_denominator=16)).map(
    lambda t: (t[0], t[0] + t[1]))


@given(losses, cells)
def test_infimum_below_average(c, cell):
    a, b = cell
    assert c.inf_coeff(a, b) <= c.avg_coeff(a, b) + 1e-15


@given(losses, cells, st.fractions(0, 1, max_denominator=8))
def test_average_is_additive(c, cell, split):
    a, b = cell
    m = a + (b - a) * split
    assume(a < m < b)
    whole = c.avg_exact(a, b) * (b - a)
    parts = c.avg_exact(a, m) * (m - a) + c.avg_exact(m, b) * (b - m)
    assert whole == parts


@given(st.sampled_from([l1(), l2(), capped_linear(2, 10)]), cells)
def test_even_losses_mirror(c, cell):
    a, b = cell
    assert c.avg_coeff(a, b) == pytest.approx(c.avg_coeff(-b, -a), rel=1e-14)
    assert c.inf_coeff(a, b) == c.inf_coeff(-b, -a)


@given(losses, cells)
def test_exact_average_agrees_with_quadrature(c, cell):
    a, b = float(cell[0]), float(cell[1])
    ref = integrate.quad(c, a, b, points=[0.0, 1.0, -1.0, 2.0, -2.0], limit=200)[0] / (b - a)
    assert c.avg_coeff(a, b) == pytest.approx(ref, rel=1e-9, abs=1e-12)
