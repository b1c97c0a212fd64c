from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voldisc.errors import ConvergenceError, DomainError
from voldisc.poisson import (
    ContinuousFamily,
    QuadratureSpec,
    laguerre_rule,
    poisson_family,
    poisson_family_with_errors,
    poisson_primitive,
    poisson_scalar,
    partial_integration_forms,
    verify_transformed_identity,
)
from voldisc.seqkernel import GridSequence, cesaro_kernel, continuous_g

Q = QuadratureSpec()
V = np.arange(31)


def test_quadrature_spec_validation():
    with pytest.raises(DomainError):
        QuadratureSpec(nodes=4)
    with pytest.raises(DomainError):
        QuadratureSpec(target_tol=0.0)
    with pytest.raises(DomainError):
        QuadratureSpec(scheme="simpson")


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_scalar_transform_of_power_kernel(alpha):
    # with a = omega = 1 the transform of g_alpha is the discrete kernel k^alpha
    q = QuadratureSpec("composite-adaptive", 32, 1e-10)
    got = [poisson_scalar(lambda t: continuous_g(alpha, t), 1.0, 1.0, v, q) for v in range(8)]
    np.testing.assert_allclose(got, [cesaro_kernel(alpha, v) for v in range(8)], rtol=1e-9)


def test_laguerre_weights_are_probabilities():
    x, w = laguerre_rule(3.0, 16)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    assert np.dot(w, x) == pytest.approx(4.0, rel=1e-13)  # mean of Gamma(4, 1)


@pytest.mark.parametrize("v", [0, 1, 5, 30, 120])
def test_normalization(v):
    assert poisson_scalar(lambda t: 1.0, 1.0, 1.0, v) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("v", [0, 1, 5, 30])
def test_exponential_closed_form(v):
    got = poisson_scalar(lambda t: math.exp(-t), 1.0, 1.0, v, growth=(1.0, -1.0))
    assert got == pytest.approx(2.0 ** -(v + 1), rel=1e-12)


@pytest.mark.parametrize("v", [0, 1, 5, 30])
def test_omega_scaling(v):
    assert poisson_scalar(lambda t: 1.0, 1.0, 2.0, v) == pytest.approx(2.0**v, rel=1e-12)


@pytest.mark.parametrize("scheme", ["generalized-laguerre", "composite-adaptive"])
def test_family_closed_forms(scheme):
    q = QuadratureSpec(scheme=scheme)
    S = poisson_family(ContinuousFamily.constant(np.eye(2)), 1.0, 1.0, 30, q)
    np.testing.assert_allclose(S.values, np.broadcast_to(np.eye(2), (31, 2, 2)), atol=1e-12)
    T = ContinuousFamily(lambda t: math.exp(-t) * np.eye(1), 1, (1.0, -1.0))
    S = poisson_family(T, 1.0, 1.0, 30, q)
    np.testing.assert_allclose(S.values[:, 0, 0], 2.0 ** -(V + 1.0), rtol=1e-11)


def test_growing_family_bound():
    # ||T(t)|| <= e^{(1-c) t} with a = 1 gives ||S(v)|| <= c^{-1} c^{-v}
    c = 0.8
    T = ContinuousFamily(lambda t: math.exp((1 - c) * t) * np.eye(1), 1, (1.0, 1 - c))
    S = poisson_family(T, 1.0, 1.0, 60, Q)
    norms = S.norms()
    bound = c ** -(np.arange(61) + 1.0)
    assert np.all(norms <= bound * (1 + 1e-10))
    omega = math.log(1 / c) + 0.05
    weighted = np.exp(-omega * np.arange(61)) * norms
    partial = np.cumsum(weighted)
    limit = 1 / c / (1 - math.exp(-omega) / c)
    assert partial[-1] <= limit and limit - partial[-1] < 0.2 * limit


def test_divergence_detected():
    T = ContinuousFamily(lambda t: math.exp(2 * t) * np.eye(1), 1, (1.0, 2.0))
    with pytest.raises(ConvergenceError):
        poisson_family(T, 1.0, 1.0, 3, Q)
    with pytest.raises(ConvergenceError):
        poisson_scalar(lambda t: math.exp(2 * t), 1.0, 1.0, 3)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_linearity(al, be):
    T1 = ContinuousFamily(lambda t: math.exp(-0.3 * t) * np.eye(1), 1, (1.0, -0.3))
    T2 = ContinuousFamily(lambda t: math.cos(t) * np.eye(1), 1, (1.0, 0.0))
    T = ContinuousFamily(lambda t: al * T1(t) + be * T2(t), 1, (abs(al) + abs(be) + 1, 0.0))
    lhs = poisson_family(T, 1.0, 1.0, 20, Q).values
    rhs = al * poisson_family(T1, 1.0, 1.0, 20, Q).values + be * poisson_family(T2, 1.0, 1.0, 20, Q).values
    np.testing.assert_allclose(lhs, rhs, atol=2e-12 * (1 + abs(al) + abs(be)))


# {{{ the transformed resolvent identity


def _scalar_instance(lam, a, omega, q=Q, vmax=40):
    T = ContinuousFamily(lambda t: math.exp(-lam * t) * np.eye(1), 1, (1.0, -lam))
    S = poisson_family(T, a, omega, vmax, q)
    k = GridSequence(np.array([poisson_scalar(lambda t: 1.0, a, omega, v, q) for v in range(vmax + 1)]))
    A = GridSequence(-lam * k.values)
    return S, k, A


@pytest.mark.parametrize("a, omega", [(1.0, 1.0), (2.0, 1.0), (1.5, 0.5)])
def test_verify_transformed_identity_scalar(a, omega):
    S, k, A = _scalar_instance(0.7, a, omega)
    res = verify_transformed_identity(S, k, A, np.eye(1), np.eye(1), tol=10 * Q.target_tol)
    assert res.passed, res.max_rel


def test_verify_transformed_identity_zero_kernel():
    kfun = lambda t: math.exp(-0.5 * t) * (1 + t)  # noqa: E731
    C = np.array([[2.0, 1.0], [0.0, 1.0]])
    T = ContinuousFamily(lambda t: kfun(t) * C, 2, (4.0, -0.4))
    S = poisson_family(T, 1.0, 1.0, 20, Q)
    k = GridSequence(np.array([poisson_scalar(kfun, 1.0, 1.0, v, Q, (2.0, -0.4)) for v in range(21)]))
    res = verify_transformed_identity(S, k, np.zeros((21, 2, 2)), np.eye(2), C, tol=10 * Q.target_tol)
    assert res.passed


def test_verify_transformed_identity_mismatched_transform_fails():
    S, k, A = _scalar_instance(0.7, 1.0, 1.0)
    S2, _, _ = _scalar_instance(0.7, 1.3, 1.0)
    res = verify_transformed_identity(S2, k, A, np.eye(1), np.eye(1), tol=1e-10)
    assert not res.passed
    assert res.max_abs > 1e-3


def test_residual_decreases_with_nodes_until_plateau():
    lam = 0.7
    T = ContinuousFamily(lambda t: math.exp(-lam * t) * math.cos(t) * np.eye(1), 1, (1.0, -lam))
    residuals = []
    for nodes in (8, 16, 32, 64):
        q = QuadratureSpec(nodes=nodes, target_tol=1e-6)
        S, err = poisson_family_with_errors(T, 1.0, 1.0, 10, q)
        residuals.append(float(np.max(err)))
    for r0, r1 in zip(residuals, residuals[1:]):
        assert r1 <= r0 + 1e-12


def test_primitive_closed_forms():
    U, Theta = poisson_primitive(ContinuousFamily.constant(np.eye(2)), lambda t: 1.0, 1.0, 1.0, 20)
    np.testing.assert_allclose(U.values, np.multiply.outer(V[:21] + 1.0, np.eye(2)), rtol=1e-12)
    np.testing.assert_allclose(Theta.values, V[:21] + 1.0, rtol=1e-12)
    zero = ContinuousFamily(lambda t: np.zeros((1, 1)), 1, (1.0, 0.0))
    U, Theta = poisson_primitive(zero, lambda t: math.exp(-t), 1.0, 1.0, 10)
    assert np.all(U.values == 0)
    # int_0^t e^{-s} ds = 1 - e^{-t} transforms to 1 - 2^{-(v+1)}
    np.testing.assert_allclose(Theta.values, 1 - 2.0 ** -(V[:11] + 1.0), rtol=1e-12)


def test_primitive_strong_solution():
    # U_aw solves B U(v) = Theta(v) C + (U *0 A)(v) for the scalar instance
    lam = 0.7
    T = ContinuousFamily(lambda t: math.exp(-lam * t) * np.eye(1), 1, (1.0, -lam))
    U, Theta = poisson_primitive(T, lambda t: 1.0, 1.0, 1.0, 30)
    _, k, A = _scalar_instance(lam, 1.0, 1.0, vmax=30)
    res = verify_transformed_identity(U, Theta, A, np.eye(1), np.eye(1), tol=10 * Q.target_tol)
    assert res.passed


def test_partial_integration_forms():
    lam, a, omega = 0.7, 1.5, 0.5
    S, k, A = _scalar_instance(lam, a, omega, vmax=30)
    T = ContinuousFamily(lambda t: math.exp(-lam * t) * np.eye(1), 1, (1.0, -lam))
    U, _ = poisson_primitive(T, lambda t: 1.0, a, omega, 30)
    derived, displayed = partial_integration_forms(S, k, A, U, np.eye(1), np.eye(1), a, omega)
    assert derived.max_abs <= 1e-10
    # the alternative placement of the powers of omega does not hold
    assert displayed.max_abs > 1e-3


def test_sampled_family_from_file(tmp_path):
    t = np.linspace(0, 40, 8001)
    rows = np.column_stack([t, np.exp(-t), np.zeros_like(t), np.zeros_like(t), np.exp(-t)])
    path = tmp_path / "samples.txt"
    np.savetxt(path, rows, delimiter=",", header="t, T11, T12, T21, T22")
    T = ContinuousFamily.from_file(str(path), delimiter=",", growth=(1.0, -1.0))
    assert T.check_growth(t[::100])
    S = poisson_family(T, 1.0, 1.0, 5, QuadratureSpec(target_tol=1e-6))
    np.testing.assert_allclose(S.values[:, 0, 0], 2.0 ** -(np.arange(6) + 1.0), atol=1e-6)


# }}}
