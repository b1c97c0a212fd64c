from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from voldisc.errors import CertificationError, DomainError, ShapeError
from voldisc.seqkernel import (
    BiSequence,
    Decay,
    GridSequence,
    KernelSpec,
    cesaro_kernel,
    cesaro_sequence,
    continuous_g,
    conv0,
    exp_weight,
    weyl_conv,
)


# {{{ Cesàro kernels


@pytest.mark.parametrize("v", [0, 1, 5, 40, 400])
def test_cesaro_order_one_is_one(v):
    assert cesaro_kernel(1.0, v) == pytest.approx(1.0, rel=1e-14)


def test_cesaro_order_zero_is_delta():
    assert cesaro_kernel(0.0, 0) == 1.0
    assert all(cesaro_kernel(0.0, v) == 0.0 for v in range(1, 10))


@pytest.mark.parametrize("v", [0, 1, 7, 100, 1000])
def test_cesaro_order_two_counts(v):
    assert cesaro_kernel(2.0, v) == pytest.approx(v + 1, rel=1e-12)


def test_cesaro_half_at_one():
    assert cesaro_kernel(0.5, 1) == pytest.approx(0.5, rel=1e-15)


def test_cesaro_negative_order_rejected():
    with pytest.raises(DomainError):
        cesaro_kernel(-0.1, 3)


def test_cesaro_large_index_does_not_overflow():
    # Gamma(v + alpha) alone overflows near v = 171
    val = cesaro_kernel(1.5, 5000)
    assert math.isfinite(val)
    assert val == pytest.approx(5001.5 ** 0.5 / gamma(1.5), rel=1e-3)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 1.0, 1.7, 2.0])
@pytest.mark.parametrize("beta", [0.0, 0.3, 0.5, 1.0, 1.7, 2.0])
def test_cesaro_semigroup(alpha, beta):
    H = 200
    got = conv0(cesaro_sequence(alpha, H), cesaro_sequence(beta, H)).values
    want = cesaro_sequence(alpha + beta, H).values
    assert np.all(np.abs(got - want) <= 1e-12 * np.abs(want) + 1e-300)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_cesaro_asymptotics_against_continuous_kernel(alpha):
    # k^alpha(v) = g_alpha(v) (1 + O(1/v)); the constant fitted on [50, 200]
    # stays put when the window moves out
    def worst(lo, hi):
        vs = range(lo, hi + 1)
        return max(abs(cesaro_kernel(alpha, v) - continuous_g(alpha, v)) * v
                   / continuous_g(alpha, v) for v in vs)

    c = worst(50, 200)
    assert c < 1.0
    assert worst(201, 800) <= c * 1.01


# }}}


# {{{ conv0


def test_conv0_delta_is_identity():
    b = GridSequence(np.arange(10.0) ** 2)
    delta = KernelSpec.delta().sequence(9)
    np.testing.assert_array_equal(conv0(delta, b).values, b.values)


def test_conv0_ones_counts():
    ones = GridSequence(np.ones(20))
    np.testing.assert_allclose(conv0(ones, ones).values, np.arange(1, 21))


def test_conv0_matrix_vector():
    A = GridSequence(np.array([np.eye(2), [[0.0, 1.0], [0.0, 0.0]]]))
    x = GridSequence(np.array([[1.0, 2.0], [3.0, 4.0]]))
    got = conv0(A, x).values
    np.testing.assert_allclose(got, [[1.0, 2.0], [5.0, 4.0]])


def test_conv0_shape_mismatch():
    with pytest.raises(ShapeError):
        conv0(GridSequence(np.ones((3, 2))), GridSequence(np.ones((3, 3))))


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 25).flatmap(
    lambda n: st.tuples(*[st.lists(finite, min_size=n, max_size=n)] * 3)))
def test_conv0_commutative_and_associative(seqs):
    a, b, c = (GridSequence(np.array(s)) for s in seqs)
    ab = conv0(a, b).values
    np.testing.assert_allclose(ab, conv0(b, a).values, rtol=1e-13, atol=1e-13 * (1 + np.abs(ab).max()))
    left = conv0(conv0(a, b), c).values
    right = conv0(a, conv0(b, c)).values
    scale = 1 + np.abs(np.array(seqs)).max() ** 3 * len(seqs[0]) ** 2
    np.testing.assert_allclose(left, right, rtol=0, atol=1e-13 * scale)


# }}}


# {{{ weyl_conv


def test_weyl_delta_is_identity():
    b = BiSequence.from_function(lambda v: 0.5 ** abs(v), -20, 10, Decay.geometric(0.5, 1.0))
    out = weyl_conv(KernelSpec.delta().sequence(40), b)
    np.testing.assert_allclose(out.values, b.values)
    assert out.tail.max() == 0.0


def test_weyl_geometric_kernel_on_constant():
    # sum_{s >= 0} 0.5^s = 2; the truncation bound covers the rest
    a = KernelSpec.geometric(1.0, 0.5).sequence(200)
    b = BiSequence(np.ones(101), -60, Decay.constant(1.0))
    out = weyl_conv(a, b, lo=-10, hi=40)
    err = np.abs(out.values - 2.0)
    assert np.all(err <= out.tail + 1e-15)
    assert err.max() < 1e-14


def test_weyl_refuses_without_decay():
    a = GridSequence(np.ones(10))
    b = BiSequence(np.ones(5), 0)
    with pytest.raises(CertificationError):
        weyl_conv(a, b)


def test_weyl_refuses_when_nothing_summable():
    a = cesaro_sequence(0.5, 50)
    b = BiSequence(np.ones(20), -10, Decay.constant(1.0))
    with pytest.raises(CertificationError):
        weyl_conv(a, b)


def test_weyl_associativity_with_conv0():
    H = 120
    f = cesaro_sequence(0.5, H)
    g = KernelSpec.geometric(1.0, 0.6).sequence(H)
    h = BiSequence.from_function(lambda v: 0.7 ** abs(v), -40, 20, Decay.geometric(0.7, 0.7 ** 40))
    # |(f *0 g)(v)| <= sup|f| * sum|g| = 2.5 beyond the horizon
    left = weyl_conv(conv0(f, g).with_decay(Decay.bounded(2.5)), h)
    inner = weyl_conv(f, h)
    right = weyl_conv(g, inner)
    diff = np.abs(left.values - right.values)
    assert np.all(diff <= left.tail + right.tail + 1e-12)


def test_weyl_certificate_is_sound_under_window_doubling():
    a = KernelSpec.geometric(1.0, 0.8).sequence(400)
    u = lambda v: 0.9 ** abs(v) * math.cos(v)  # noqa: E731
    narrow = BiSequence.from_function(u, -30, 30, Decay.geometric(0.9, 0.9 ** 30))
    wide = BiSequence.from_function(u, -60, 30, Decay.geometric(0.9, 0.9 ** 60))
    out_n = weyl_conv(a, narrow, lo=0, hi=30)
    out_w = weyl_conv(a, wide, lo=0, hi=30)
    assert np.all(np.abs(out_n.values - out_w.values) <= out_n.tail)


# }}}


# {{{ weighting and the continuous kernel


def test_exp_weight_zero_is_identity():
    s = GridSequence(np.arange(5.0))
    np.testing.assert_array_equal(exp_weight(s, 0.0).values, s.values)


def test_exp_weight_ln2_halves():
    s = GridSequence(np.ones(30))
    np.testing.assert_allclose(exp_weight(s, math.log(2)).values, 2.0 ** -np.arange(30), rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.integers(-5, 5))
def test_exp_weight_inverse(omega, shift):
    s = BiSequence.from_function(lambda v: math.sin(v) + 2, -10, 10)
    back = exp_weight(exp_weight(s, omega, shift), -omega, shift)
    np.testing.assert_allclose(back.values, s.values, rtol=1e-12)


def test_exp_weight_improves_decay():
    s = BiSequence(np.ones(5), 0, Decay.geometric(0.5, 1.0))
    w = exp_weight(s, -0.1)  # weight e^{0.1 v} shrinks the left tail further
    assert w.decay.kind == "geometric"
    assert w.decay.rate == pytest.approx(0.5 * math.exp(-0.1))


def test_continuous_g_examples():
    assert continuous_g(1.0, 3.7) == pytest.approx(1.0)
    assert continuous_g(2.0, 3.7) == pytest.approx(3.7)
    assert continuous_g(0.5, 1.0) == pytest.approx(0.5641895835, abs=1e-10)
    with pytest.raises(DomainError):
        continuous_g(0.5, 0.0)


# }}}


def test_decay_tail_sums():
    assert Decay.geometric(0.5, 1.0).sum_from(1) == pytest.approx(1.0)
    assert Decay.algebraic(0.9, 1.0).sum_from(1) == math.inf
    assert Decay.algebraic(2.0, 1.0).summable()
    assert Decay.tail_sum(3.0).sum_from(5) == 3.0
    assert not Decay.bounded(1.0).summable()
    with pytest.raises(DomainError):
        Decay.geometric(1.0, 1.0)
