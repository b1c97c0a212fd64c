from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
import scipy.linalg

from voldisc.errors import AccuracyWarning, DomainError, UnsupportedInstanceError
from voldisc.linopspace import LinOp
from voldisc.mlcontinuous import (
    MLFamily,
    caputo_kernel,
    caputo_multi_kernel,
    graded_grid,
    growth_certificate,
    mild_residual,
    mittag_leffler,
    ml_resolvent,
)
from voldisc.poisson import ContinuousFamily, QuadratureSpec, poisson_family
from voldisc.seqkernel import cesaro_sequence


def ml_series(alpha, z, beta=1.0):
    """Power series in high precision; returns (value, size of the last term)."""
    z = mpmath.mpf(z)
    with mpmath.workdps(40):
        total = mpmath.mpf(0)
        k = 0
        while True:
            term = z**k / mpmath.gamma(alpha * k + beta)
            total += term
            if k > 10 and abs(term) < mpmath.mpf(10) ** -30 * max(1, abs(total)):
                return float(total), float(abs(term))
            k += 1


def ml_laplace(alpha, z, beta=1.0):
    """Talbot inversion of ``s^(alpha-beta) / (s^alpha - z)`` at ``t = 1``."""
    with mpmath.workdps(30):
        return float(mpmath.invertlaplace(lambda s: s ** (alpha - beta) / (s**alpha - z), 1,
                                          method="talbot"))


def test_order_one_is_exponential():
    for z in (-30.0, -1.0, 0.0, 2.5):
        assert mittag_leffler(1.0, z) == pytest.approx(math.exp(z), rel=1e-14)


def test_order_two_is_cosh():
    assert mittag_leffler(2.0, 1.0) == pytest.approx(math.cosh(1.0), rel=1e-14)
    assert mittag_leffler(2.0, -4.0) == pytest.approx(math.cos(2.0), rel=1e-13)


def test_half_at_minus_one_against_series():
    ref, rem = ml_series(0.5, -1.0)
    assert rem < 1e-12
    assert mittag_leffler(0.5, -1.0) == pytest.approx(ref, abs=1e-12)
    # frozen: erfcx(1)
    assert mittag_leffler(0.5, -1.0) == pytest.approx(0.42758357615580705, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.2, 0.3, 0.7, 0.9, 1.3, 1.8])
@pytest.mark.parametrize("z", [-50.0, -12.5, -3.0, -1.01])
@pytest.mark.parametrize("beta", ["one", "alpha"])
def test_validated_box_against_laplace_inversion(alpha, z, beta):
    b = 1.0 if beta == "one" else alpha
    assert mittag_leffler(alpha, z, b) == pytest.approx(ml_laplace(alpha, z, b), abs=1e-10)


@pytest.mark.parametrize("alpha", [0.2, 0.7, 1.3, 1.8])
@pytest.mark.parametrize("z", [-1.0, -0.4, 0.8, 5.0])
def test_small_arguments_against_series(alpha, z):
    if z == 5.0 and alpha < 0.5:
        # E_alpha(5) is about exp(5^(1/alpha)) / alpha, beyond double range
        assert mittag_leffler(alpha, z) == math.inf
        return
    ref, _ = ml_series(alpha, z)
    assert mittag_leffler(alpha, z) == pytest.approx(ref, abs=1e-10, rel=1e-10)


def test_large_negative_argument_asymptotics():
    # E_alpha(-x) = 1/(x Gamma(1-alpha)) - 1/(x^2 Gamma(1-2alpha)) + O(x^-3)
    x, a = 50.0, 0.3
    approx = 1 / (x * math.gamma(1 - a)) - 1 / (x**2 * math.gamma(1 - 2 * a))
    assert mittag_leffler(a, -x) == pytest.approx(approx, abs=2 / x**3)


def test_outside_box_warns():
    with pytest.warns(AccuracyWarning):
        mittag_leffler(0.5, -80.0)
    with pytest.warns(AccuracyWarning):
        mittag_leffler(0.1, -1.0)
    with pytest.raises(DomainError):
        mittag_leffler(0.0, 1.0)


def test_resolvent_examples():
    t = 0.8
    np.testing.assert_allclose(ml_resolvent(0.4 * np.eye(2), 1.0, t), math.exp(-0.4 * t) * np.eye(2),
                               rtol=1e-14)
    np.testing.assert_allclose(ml_resolvent(np.eye(2), 2.0, t), math.cos(t) * np.eye(2), rtol=1e-13)
    got = ml_resolvent(np.diag([0.3, 0.7]), 0.5, 1.0)
    want = np.diag([ml_series(0.5, -0.3)[0], ml_series(0.5, -0.7)[0]])
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_resolvent_rejects_jordan_block():
    with pytest.raises(UnsupportedInstanceError):
        ml_resolvent(np.array([[1.0, 1.0], [0.0, 1.0]]), 0.5, 1.0)


def test_semigroup_at_order_one():
    A = np.array([[0.5, 0.2], [0.1, 0.3]])
    fam = MLFamily(LinOp(A), 1.0)
    ts = np.linspace(0, 3, 7)
    for t in ts:
        for s in ts:
            np.testing.assert_allclose(fam(t + s), fam(t) @ fam(s), atol=1e-9)
        np.testing.assert_allclose(fam(t), scipy.linalg.expm(-t * A), atol=1e-10)


def test_spectral_consistency():
    A = np.array([[0.6, 0.2], [0.2, 0.3]])
    fam = MLFamily(LinOp(A), 0.6)
    lam = np.linalg.eigvalsh(A)
    for t in (0.5, 2.0):
        got = np.sort(np.linalg.eigvals(fam(t)).real)
        want = np.sort([mittag_leffler(0.6, -l * t**0.6) for l in lam])
        np.testing.assert_allclose(got, want, atol=1e-10)


def test_mild_residual_examples():
    # the product rule is second order: halving the step quarters the residual
    coarse = mild_residual(MLFamily(LinOp(0.7 * np.eye(1)), 1.0), n=2000)
    fine = mild_residual(MLFamily(LinOp(0.7 * np.eye(1)), 1.0), n=4000)
    assert fine <= 1e-6
    assert fine == pytest.approx(coarse / 4, rel=0.05)
    assert mild_residual(MLFamily(LinOp(0.5 * np.eye(1)), 0.5), n=1000) <= 1e-5
    assert mild_residual(MLFamily(LinOp(np.zeros((2, 2))), 0.5)) == 0.0


def test_mild_residual_refines():
    fam = MLFamily(LinOp(0.5 * np.eye(1)), 0.5)
    assert mild_residual(fam, n=800) <= mild_residual(fam, n=200)


def test_growth_certificate_examples():
    grid = np.linspace(0, 20, 401)
    M, ok = growth_certificate(lambda t: math.exp(-0.5 * t) * np.eye(2), grid, 0.9)
    assert ok and M == 1.0
    _, ok = growth_certificate(lambda t: math.exp(2 * t) * np.eye(2), grid, 0.5)
    assert not ok
    fam = MLFamily(LinOp(np.diag([0.2, 1.0])), 0.5)
    M, ok = growth_certificate(fam, grid, 0.5)
    assert ok and M == pytest.approx(1.0)


def test_poisson_of_exponential_family():
    lam = 0.5
    fam = MLFamily(LinOp(lam * np.eye(1)), 1.0)
    T = ContinuousFamily(fam, 1, growth=(1.0, -lam))
    S = poisson_family(T, 1.0, 1.0, 40, QuadratureSpec())
    want = (1 + lam) ** -(np.arange(41) + 1.0)
    np.testing.assert_allclose(S.values[:, 0, 0], want, rtol=1e-12)


def test_caputo_kernel_matches_product_formula():
    alpha = 0.6
    m = math.ceil(alpha)
    seq = caputo_kernel(alpha).sequence(20).values
    for v in range(21):
        prod = math.prod(alpha - i for i in range(1, v + m + 1))
        want = (-1) ** (v + m + 1) / math.factorial(v + m) * prod
        assert seq[v] == pytest.approx(want, rel=1e-12)
    np.testing.assert_allclose(seq, -cesaro_sequence(1 - alpha, 21).values[1:], rtol=1e-13)


def test_caputo_multi_kernel():
    # only summands with m_j - 1 >= k contribute
    ks = caputo_multi_kernel(1, [0.5, 1.5]).sequence(10).values
    m = 2
    want = [(-1) ** (v + m + 1) / math.factorial(v + m)
            * math.prod(1.5 - 1 - i for i in range(1, v + m + 1)) for v in range(11)]
    np.testing.assert_allclose(ks, want, rtol=1e-12)
    # with one shared order both summands use gamma = 0.5 (m = 1 and m = 2)
    single = caputo_multi_kernel(0, [0.5, 1.5], global_alpha=0.5).sequence(5).values
    k = cesaro_sequence(0.5, 8).values
    np.testing.assert_allclose(single, -(k[1:7] + k[2:8]), rtol=1e-13)


def test_graded_grid():
    assert graded_grid(1.0, 4, 2.0)[1] == pytest.approx(1 / 16)
