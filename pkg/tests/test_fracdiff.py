from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voldisc.errors import CertificationError, DomainError, HorizonError
from voldisc.fracdiff import (
    FracOrder,
    antidifference,
    forward_diff,
    frac_sum,
    rl_frac_diff,
    weyl_commutation_defect,
    weyl_frac_diff,
    weyl_frac_sum,
)
from voldisc.seqkernel import BiSequence, Decay, GridSequence, cesaro_sequence

vals = st.lists(st.floats(-5, 5, allow_nan=False), min_size=12, max_size=40)


def test_frac_order():
    assert FracOrder(0.4).m == 1
    assert FracOrder(2.0).m == 2
    assert FracOrder(1.4).complement == pytest.approx(0.6)
    with pytest.raises(DomainError):
        FracOrder(0.0)


# {{{ forward differences


def test_forward_diff_examples():
    assert np.all(forward_diff(GridSequence(np.full(10, 3.0)), 2).values == 0)
    np.testing.assert_array_equal(forward_diff(GridSequence(np.arange(10.0)), 1).values, np.ones(9))
    with pytest.raises(HorizonError):
        forward_diff(GridSequence(np.ones(3)), 3)


@settings(max_examples=50, deadline=None)
@given(vals)
def test_forward_diff_is_iterated(xs):
    u = GridSequence(np.array(xs))
    once = forward_diff(forward_diff(forward_diff(u, 1), 1), 1).values
    np.testing.assert_allclose(forward_diff(u, 3).values, once, rtol=0, atol=1e-12)


# }}}


# {{{ sums and Riemann-Liouville differences


def test_frac_sum_examples():
    u = GridSequence(np.arange(1.0, 11.0))
    np.testing.assert_allclose(frac_sum(u, 1.0).values, np.cumsum(u.values))
    delta = GridSequence(np.eye(1, 30)[0])
    np.testing.assert_allclose(frac_sum(delta, 0.7).values, cesaro_sequence(0.7, 29).values)


@settings(max_examples=40, deadline=None)
@given(vals, st.floats(0.1, 2.0), st.floats(0.1, 2.0))
def test_frac_sum_semigroup(xs, a, b):
    u = GridSequence(np.array(xs))
    left = frac_sum(frac_sum(u, a), b).values
    right = frac_sum(u, a + b).values
    np.testing.assert_allclose(left, right, rtol=1e-12, atol=1e-12 * np.abs(right).max())


def test_rl_integer_order_is_forward_difference():
    u = GridSequence(np.sin(np.arange(20.0)))
    np.testing.assert_allclose(rl_frac_diff(u, 1.0).values, forward_diff(u, 1).values)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_rl_of_cesaro_vanishes(alpha):
    # k^{m-alpha} *0 k^alpha = k^m is a polynomial of degree m - 1
    u = cesaro_sequence(alpha, 10 + math.ceil(alpha))
    out = rl_frac_diff(u, alpha).values
    np.testing.assert_allclose(out[:11], np.zeros(11), atol=1e-13)


def test_rl_of_ones_half():
    out = rl_frac_diff(GridSequence(np.ones(30)), 0.5).values
    want = cesaro_sequence(0.5, 29).values[1:]
    np.testing.assert_allclose(out, want, rtol=1e-13)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.4])
def test_rl_round_trip(alpha):
    rng = np.random.default_rng(3)
    u = GridSequence(rng.normal(size=101))
    # the forward difference reads m values ahead, so the round trip returns
    # u(v + m) at index v
    m = math.ceil(alpha)
    back = rl_frac_diff(frac_sum(u, alpha), alpha).values
    np.testing.assert_allclose(back, u.values[m:], atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(vals, st.floats(-3, 3), st.floats(0.1, 2.5))
def test_rl_linear(xs, c, alpha):
    u = GridSequence(np.array(xs))
    w = GridSequence(np.cos(np.arange(len(xs))))
    lhs = rl_frac_diff(GridSequence(c * u.values + w.values), alpha).values
    rhs = c * rl_frac_diff(u, alpha).values + rl_frac_diff(w, alpha).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))


# }}}


# {{{ Weyl differences


def test_weyl_annihilates_constants():
    u = BiSequence(np.full(40, 2.5), -20, Decay.constant(2.5))
    out = weyl_frac_diff(u, 0.4)
    assert np.all(np.abs(out.values) <= out.tail + 1e-15)
    assert np.max(np.abs(out.values)) == 0.0


def test_weyl_integer_order_is_forward_difference():
    u = BiSequence.from_function(lambda v: 0.5 ** abs(v), -30, 10, Decay.geometric(0.5, 0.5 ** 30))
    got = weyl_frac_diff(u, 2.0)
    want = forward_diff(u, 2)
    np.testing.assert_allclose(got.values, want.values)


def test_weyl_shift_equivariance():
    fn = lambda v: 0.6 ** abs(v) * (1 + 0.1 * v)  # noqa: E731
    u = BiSequence.from_function(fn, -40, 20, Decay.zero())
    a = 3
    h = BiSequence.from_function(lambda v: fn(v + a), -40 - a, 20 - a, Decay.zero())
    du = weyl_frac_diff(u, 0.7)
    dh = weyl_frac_diff(h, 0.7)
    lo, hi = max(du.lo - a, dh.lo), min(du.hi - a, dh.hi)
    np.testing.assert_allclose(dh.restrict(lo, hi).values, du.restrict(lo + a, hi + a).values,
                               rtol=0, atol=1e-15)


def test_weyl_refuses_slow_decay():
    u = BiSequence(np.ones(20), -10, Decay.bounded(1.0))
    with pytest.raises(CertificationError):
        weyl_frac_sum(u, 0.5)


def test_weyl_frac_sum_on_compact_support_matches_rl():
    x = np.sin(np.arange(25.0))
    u = BiSequence(x, 0, Decay.zero())
    np.testing.assert_allclose(weyl_frac_sum(u, 0.6).values, frac_sum(GridSequence(x), 0.6).values)


def test_commutation_compact_support():
    rng = np.random.default_rng(1)
    u = BiSequence(rng.normal(size=30), -10, Decay.zero())
    res = weyl_commutation_defect(u, 0.4)
    assert res.defect <= 1e-12
    assert res.passed


def test_commutation_geometric_decay():
    u = BiSequence.from_function(lambda v: 0.5 ** abs(v), -40, 40, Decay.geometric(0.5, 0.5 ** 40))
    res = weyl_commutation_defect(u, 0.4)
    assert res.passed


def test_commutation_constant():
    u = BiSequence(np.full(20, -1.0), -5, Decay.constant(1.0))
    res = weyl_commutation_defect(u, 0.4)
    assert res.defect == 0.0


# }}}


# {{{ antidifference


def test_antidifference_examples():
    zero = antidifference(GridSequence(np.zeros(10)), 1, [0.0])
    assert np.all(zero.values == 0)
    h = antidifference(GridSequence(np.ones(10)), 1, [0.0])
    np.testing.assert_array_equal(h.values, np.arange(11.0))


@settings(max_examples=40, deadline=None)
@given(vals, st.floats(-2, 2), st.floats(-2, 2))
def test_antidifference_inverts(xs, h0, h1):
    u = GridSequence(np.array(xs))
    h = antidifference(u, 2, [h0, h1])
    np.testing.assert_allclose(forward_diff(h, 2).values, u.values, atol=1e-9)
    assert h.values[0] == h0 and h.values[1] == h1


# }}}
