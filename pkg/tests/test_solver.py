from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voldisc.errors import CertificationError, PreconditionError, SummabilityRefusal
from voldisc.fracdiff import antidifference, forward_diff
from voldisc.resolvent import (
    ProblemSpec,
    build_family,
    build_family_shifted,
    matrix_kernel,
)
from voldisc.seqkernel import BiSequence, Decay, GridSequence, KernelSpec
from voldisc.solver import (
    ap_decomposition,
    correction_g,
    dacp_solution,
    exp_weighted_solution,
    family_tail,
    shift_combination,
    solve,
    verify_bundle,
    verify_fractional_equation,
    verify_multiterm,
    verify_nonscalar_solution,
    verify_weyl_multiterm,
    weyl_solution,
)

DELTA = KernelSpec.delta()
ONE = np.eye(1)
I2 = np.eye(2)

# S(z) = 1 / (1 - 0.2 / (1 - 0.3 z)) = 1 + 0.25 / (1 - 0.375 z), so sum_v S(v) = S(1) = 1.4
LAM, R = 0.2, 0.3
SUM_S = 1.4
RATE = 0.375


def scalar_spec():
    return ProblemSpec(ONE, ONE, [LAM * ONE], [KernelSpec.geometric(1.0, R)], [0], DELTA)


@pytest.fixture(scope="module")
def scalar_family():
    return build_family(scalar_spec(), 200)


def lagged_spec():
    # P_M = 3, ||P_M^{-1} B|| + sum_{v >= 1} 0.2^v = 1/3 + 1/4 < 1
    return ProblemSpec(ONE, ONE, [3.0 * ONE], [KernelSpec.geometric(1.0, 0.2)], [1], DELTA)


@pytest.fixture(scope="module")
def lagged_family():
    return build_family_shifted(lagged_spec(), 200)


def geometric_forcing(lo, hi, rho=0.5):
    return BiSequence.from_function(lambda v: [rho ** abs(v)], lo, hi,
                                    Decay.geometric(rho, rho ** abs(lo)))


# {{{ Weyl solutions


def test_identity_family_returns_forcing():
    spec = ProblemSpec(I2, I2, [np.zeros((2, 2))], [DELTA], [0], DELTA)
    fam = build_family(spec, 80)
    f = BiSequence.from_function(lambda v: [math.sin(v), 0.7 ** abs(v)], -40, 40, Decay.bounded(1.0))
    u = weyl_solution(fam, f)
    np.testing.assert_allclose(u.values, f.values)


def test_delta_forcing_returns_family_column(scalar_family):
    f = BiSequence(np.eye(1, 61, 10).T, -10, Decay.zero())
    u = weyl_solution(scalar_family, f)
    vals = u.values[:, 0]
    assert np.all(vals[:10] == 0)
    np.testing.assert_allclose(vals[10:], scalar_family.S.values[:51, 0, 0], rtol=1e-15)
    assert u.tail.max() == 0.0


def test_constant_forcing_gives_family_sum(scalar_family):
    f = BiSequence(np.ones((151, 1)), -100, Decay.constant(1.0))
    u = weyl_solution(scalar_family, f, (-50, 50))
    err = np.abs(u.values[:, 0] - SUM_S)
    assert np.all(err <= u.tail + 1e-14)
    assert err.max() < 1e-12
    full = weyl_solution(scalar_family, f)
    assert full.decay is not None and full.decay.kind == "bounded"


def test_refusal_without_certificate():
    spec = ProblemSpec(ONE, ONE, [0.5 * ONE], [KernelSpec.cesaro(1.0)], [0], DELTA)
    fam = build_family(spec, 60)  # S(v) = 2^v
    with pytest.raises(SummabilityRefusal, match=r"omega > 0\.69"):
        weyl_solution(fam, geometric_forcing(-20, 20))


def test_family_tail_sources(scalar_family):
    assert family_tail(scalar_family).rigorous
    assert "criterion" in family_tail(scalar_family).source
    info = family_tail(scalar_family, growth=(1.25, RATE))
    assert info.decay.kind == "geometric" and info.source == "declared growth bound"


# }}}


# {{{ correction term


def test_correction_vanishes_without_lags(scalar_family):
    g = correction_g(scalar_spec(), scalar_family, geometric_forcing(-30, 30))
    assert np.all(g.values == 0)


def test_correction_single_lag(lagged_family):
    f = geometric_forcing(-30, 30)
    g = correction_g(lagged_spec(), lagged_family, f)
    S0 = lagged_family.S.values[0, 0, 0]
    want = -1.0 * 3.0 * S0 * f.values[1:, 0]  # -a(0) A S(0) f(v + 1)
    np.testing.assert_allclose(g.values[:, 0], want, rtol=1e-15)
    assert g.window == (-30, 29)


def test_lagged_bundle_and_negative_control(lagged_family):
    f = geometric_forcing(-80, 80)
    bundle = solve(lagged_family, f)
    assert bundle.passed
    rep = bundle.residual_report["multiterm"]
    assert rep.max_rel <= 1e-12
    dropped = verify_multiterm(lagged_spec(), bundle.u, f, None, 1e-8)
    assert not dropped.passed
    assert dropped.max_abs > 1e-2


def test_bundle_round_trip(lagged_family, scalar_family):
    for fam in (lagged_family, scalar_family):
        bundle = solve(fam, geometric_forcing(-60, 60))
        again = verify_bundle(bundle)
        for key, res in bundle.residual_report.items():
            np.testing.assert_array_equal(again[key].absolute, res.absolute)
            assert again[key].passed


# }}}


# {{{ verification identities


def test_nonscalar_identity(scalar_family):
    spec = scalar_spec()
    f = geometric_forcing(-60, 60)
    u = weyl_solution(scalar_family, f)
    A = matrix_kernel(spec, 200).with_decay(Decay.geometric(R, LAM * R ** 200))
    res = verify_nonscalar_solution(spec.B, A, spec.k, spec.C, f, u)
    assert res.passed
    multi = verify_multiterm(spec, u, f, None)
    lo = max(res.start, multi.start)
    n = min(res.start + res.absolute.size, multi.start + multi.absolute.size) - lo
    np.testing.assert_allclose(res.absolute[lo - res.start: lo - res.start + n],
                               multi.absolute[lo - multi.start: lo - multi.start + n], atol=1e-15)


def test_nonscalar_identity_without_kernel():
    f = geometric_forcing(-20, 20)
    k = KernelSpec.geometric(1.0, 0.5)
    B = 2.0 * ONE
    # B u = k o f has the solution u = (k o f) / 2
    kf = np.array([sum(0.5 ** (v - l) * 0.5 ** abs(l) for l in range(-400, v + 1))
                   for v in range(-20, 21)])
    u = BiSequence((kf / 2)[:, None], -20, Decay.geometric(0.5, 1.0))
    A = GridSequence(np.zeros((1, 1, 1)), Decay.zero())
    res = verify_nonscalar_solution(B, A, k, ONE, f, u)
    assert res.passed
    assert res.max_abs <= res.max_tail + 1e-14


def test_zero_forcing_zero_solution(scalar_family):
    f = BiSequence(np.zeros((41, 1)), -20, Decay.zero())
    u = weyl_solution(scalar_family, f)
    assert np.all(u.values == 0)
    spec = scalar_spec()
    A = matrix_kernel(spec, 200).with_decay(Decay.geometric(R, 1.0))
    assert verify_nonscalar_solution(spec.B, A, spec.k, spec.C, f, u).max_abs == 0.0


def test_perturbation_raises_residual(scalar_family):
    f = geometric_forcing(-60, 60)
    u = weyl_solution(scalar_family, f)
    delta = 1e-4
    vals = u.values.copy()
    vals[70] += delta  # index v = 10
    bad = BiSequence(vals, u.lo, u.decay, u.tail)
    res = verify_multiterm(scalar_spec(), bad, f, None)
    # B - lam * a(0) is what multiplies the perturbation at its own index
    assert res.absolute[10 - res.start] >= (1.0 - LAM) * delta * (1 - 1e-6)
    assert not res.passed


def test_uniqueness_on_overlap(scalar_family):
    short = weyl_solution(scalar_family, geometric_forcing(-60, 60))
    long = weyl_solution(scalar_family, geometric_forcing(-120, 60), (-60, 60))
    diff = np.abs(short.values - long.values)[:, 0]
    assert np.all(diff <= short.tail + long.tail + 1e-15)


# }}}


# {{{ fractional form


def _fractional_instance():
    # a = k^{1/2}, A = -0.4: S(z) = sqrt(1 - z) / (sqrt(1 - z) + 0.4), summable
    spec = ProblemSpec(ONE, ONE, [-0.4 * ONE], [KernelSpec.cesaro(0.5)], [0], DELTA)
    fam = build_family(spec, 400)
    f = BiSequence.from_function(lambda v: [0.6 ** v], 0, 150, Decay.zero())
    return spec, fam, f


def test_weyl_multiterm_matches_multiterm():
    spec, fam, f = _fractional_instance()
    bundle = solve(fam, f)
    assert bundle.passed
    multi = bundle.residual_report["multiterm"]
    frac = verify_weyl_multiterm(spec, [0.5], bundle.u, f, None)
    assert frac.passed
    # differencing once can at most double the undifferenced defect
    assert frac.max_abs <= 2 * multi.max_abs + frac.max_tail + 1e-15


def test_weyl_multiterm_antidifference_form():
    spec, fam, f = _fractional_instance()
    u = solve(fam, f).u
    h = antidifference(u, 1, [np.zeros(1)])
    back = forward_diff(h, 1)
    np.testing.assert_allclose(back.values, u.values, rtol=0, atol=1e-15)
    rebuilt = BiSequence(back.values, back.lo, u.decay, u.tail)
    a = verify_weyl_multiterm(spec, [0.5], u, f, None)
    b = verify_weyl_multiterm(spec, [0.5], rebuilt, f, None)
    assert b.passed
    np.testing.assert_allclose(a.absolute, b.absolute, rtol=0, atol=1e-14)


def test_weyl_multiterm_needs_common_m():
    spec = ProblemSpec(ONE, ONE, [ONE, ONE], [DELTA, DELTA], [0, 0], DELTA)
    with pytest.raises(PreconditionError):
        verify_weyl_multiterm(spec, [0.5, 1.5], BiSequence(np.zeros((5, 1)), 0, Decay.zero()),
                              BiSequence(np.zeros((5, 1)), 0, Decay.zero()), None)


def test_fractional_equation_constant_solution():
    # the Weyl difference of a constant vanishes, so 0.5 u(v) = 0.5 c
    u = BiSequence(np.full((30, 1), 2.0), -10, Decay.constant(2.0))
    rhs = BiSequence(np.full((30, 1), 1.0), -10)
    res = verify_fractional_equation([(1.0, 0.5, 0), (0.5, 0.0, 0)], u, rhs)
    assert res.passed and res.max_abs == 0.0


# }}}


# {{{ exponential weights


def test_weight_zero_is_plain_solve(scalar_family):
    f = geometric_forcing(-40, 40)
    a = exp_weighted_solution(scalar_spec(), scalar_family, f, 0.0)
    b = solve(scalar_family, f)
    np.testing.assert_array_equal(a.u.values, b.u.values)


def test_weighted_agrees_with_plain_solution(scalar_family):
    omega = 0.1
    f = BiSequence.from_function(lambda v: [0.8 ** v], 0, 120, Decay.zero())
    bundle = exp_weighted_solution(scalar_spec(), scalar_family, f, omega)
    assert bundle.passed
    plain = solve(scalar_family, f)
    np.testing.assert_allclose(bundle.u.values, plain.u.values, rtol=1e-10, atol=1e-14)
    v = np.arange(f.lo, f.lo + len(f))
    np.testing.assert_allclose(bundle.u_weighted.values[:, 0],
                               np.exp(-omega * v) * plain.u.values[:, 0], rtol=1e-10, atol=1e-14)


def test_weighted_refuses_forcing_growing_left(scalar_family):
    f = BiSequence(np.ones((151, 1)), -100, Decay.constant(1.0))
    with pytest.raises(CertificationError, match="decay fast enough"):
        exp_weighted_solution(scalar_spec(), scalar_family, f, 0.1, (-50, 50))


@pytest.fixture(scope="module")
def growing():
    spec = ProblemSpec(ONE, ONE, [0.5 * ONE], [KernelSpec.cesaro(1.0)], [0], DELTA)
    return spec, build_family(spec, 120)  # S(0) = 2, S(v) = 2^v


def test_weighted_growing_family(growing):
    spec, fam = growing
    f = BiSequence.from_function(lambda v: [math.cos(v)], 0, 100, Decay.zero())
    bundle = exp_weighted_solution(spec, fam, f, 1.0, growth=(2.0, 2.0))
    assert bundle.passed
    again = verify_bundle(bundle)
    assert again["weighted multiterm"].passed
    # the unweighted frame solves the same problem
    plain = verify_multiterm(spec, bundle.u, f, bundle.g, 1e-8)
    assert plain.max_rel <= 1e-8


def test_weighted_refusal_names_minimal_weight(growing):
    spec, fam = growing
    f = BiSequence.from_function(lambda v: [1.0], 0, 50, Decay.zero())
    with pytest.raises(SummabilityRefusal, match=r"omega > 0\.693"):
        exp_weighted_solution(spec, fam, f, 0.5, growth=(2.0, 2.0))
    with pytest.raises(PreconditionError):
        exp_weighted_solution(spec, fam, f, -1.0)


# }}}


# {{{ shift combinations


def test_shift_identity(scalar_family):
    f = geometric_forcing(-60, 60)
    u = weyl_solution(scalar_family, f)
    y, res = shift_combination(scalar_spec(), u, f, [1.0], [0])
    np.testing.assert_array_equal(y.values, u.values)
    assert res.passed


def test_shift_difference(scalar_family):
    f = geometric_forcing(-60, 60)
    u = weyl_solution(scalar_family, f)
    y, res = shift_combination(scalar_spec(), u, f, [1.0, -1.0], [1, 0])
    np.testing.assert_allclose(y.values, forward_diff(u, 1).values)
    assert res.passed


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.lists(st.integers(-4, 4), min_size=3, max_size=3))
def test_shift_random_combination(coeffs, shifts):
    fam = build_family(scalar_spec(), 200)
    f = geometric_forcing(-60, 60)
    u = weyl_solution(fam, f)
    _, res = shift_combination(scalar_spec(), u, f, coeffs, shifts)
    assert res.passed
    assert res.max_rel <= 1e-8


def test_shift_rejects_lags(lagged_family):
    f = geometric_forcing(-30, 30)
    u = weyl_solution(lagged_family, f)
    with pytest.raises(PreconditionError):
        shift_combination(lagged_spec(), u, f, [1.0], [0])


# }}}


# {{{ Cauchy problems on the nonnegative integers


def test_dacp_delta_recovers_family(scalar_family):
    x = np.array([1.5])
    res = dacp_solution(scalar_family, DELTA, x)
    np.testing.assert_allclose(res.u.values, scalar_family.S.values @ x)
    np.testing.assert_allclose(res.forcing.values[:, 0], 1.5 * DELTA.sequence(200).values)
    assert res.classification == {"strong": True, "mild": True}


def test_dacp_partial_sums_commuting():
    X = np.array([[0.3, 0.1], [0.0, 0.2]])
    spec = ProblemSpec(I2 + X, I2, [X], [KernelSpec.geometric(1.0, 0.5)], [0],
                       KernelSpec.geometric(1.0, 0.9))
    fam = build_family(spec, 100)
    res = dacp_solution(fam, KernelSpec.cesaro(1.0), np.array([1.0, -1.0]))
    np.testing.assert_allclose(res.u.values, np.cumsum(fam.S.values @ np.array([1.0, -1.0]), axis=0))
    assert res.strong.max_rel <= 1e-9
    assert res.mild.passed


def test_dacp_noncommuting_strong_differs():
    A = np.array([[0.0, 1.0], [0.0, 0.0]]) * 0.3
    spec = ProblemSpec(I2, np.diag([1.0, 2.0]), [A], [KernelSpec.geometric(1.0, 0.5)], [0], DELTA)
    fam = build_family(spec, 30)
    res = dacp_solution(fam, DELTA, np.array([1.0, 1.0]))
    # with a scalar kernel both forms agree; the mild form always holds
    assert res.mild.passed and res.strong.passed


# }}}


# {{{ periodic decomposition


def test_ap_constant_forcing(scalar_family):
    dec = ap_decomposition(scalar_family, [1.0], np.array([1.0]), 100)
    np.testing.assert_allclose(dec.H.values[:, 0], SUM_S, rtol=1e-12)
    assert dec.passed
    assert dec.sup_Q < 1e-10


def test_ap_period_two(scalar_family):
    dec = ap_decomposition(scalar_family, [1.0, -1.0], np.array([1.0]), 100)
    assert dec.passed
    assert dec.periodicity_defect <= dec.certificate
    # S(v) = 0.25 * 0.375^v for v >= 1, so Q decays at that rate
    assert dec.rate == pytest.approx(RATE, rel=1e-3)
    assert dec.consistency <= 1e-14


def test_ap_vanishing_part_only(scalar_family):
    q = KernelSpec.geometric(1.0, 0.9)
    dec = ap_decomposition(scalar_family, [0.0], np.array([1.0]), 150, q=q)
    assert np.all(dec.H.values == 0)
    np.testing.assert_allclose(dec.Q.values, dec.u.values, atol=1e-15)
    assert dec.rate == pytest.approx(0.9, rel=1e-2)
    assert dec.sup_Q < dec.u.norms().max()


# }}}
