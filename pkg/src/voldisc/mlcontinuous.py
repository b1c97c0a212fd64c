r"""Closed-form continuous resolvent families built from Mittag-Leffler functions.

For a diagonalizable matrix :math:`A` with real spectrum and
:math:`0 < \alpha \le 2` two families are provided:

* ``kind="solution"``: :math:`T(t) = E_{\alpha}(-t^{\alpha} A)`, the solution
  family of the Caputo problem :math:`\mathbf{D}^{\alpha}_t u + A u = 0`,
  :math:`u(0) = x`;
* ``kind="resolvent"``: :math:`T(t) = t^{\alpha-1} E_{\alpha,\alpha}(-t^{\alpha} A)`,
  the family of the Riemann–Liouville problem :math:`D^{\alpha}_t u + A u = 0`.

Mittag-Leffler evaluation strategy
----------------------------------
``E_{alpha,beta}(z)`` is evaluated by

1. closed forms: ``exp`` (alpha = beta = 1), ``cosh``/``cos`` (alpha = 2,
   beta = 1), ``erfcx`` (alpha = 1/2 with beta in {1/2, 1});
2. the power series in double precision with a geometric remainder bound,
   when ``z >= 0`` or ``|z| <= 1`` (no cancellation to speak of);
3. for ``0 < alpha < 1``, ``z < -1`` and ``beta`` in {1, alpha}: the Laplace
   representation over the positive axis, integrated with adaptive
   quadrature;
4. otherwise the power series in ``mpmath`` with working precision raised by
   the number of digits lost to cancellation (about ``|z|^{1/alpha} / ln 10``).

The validated box is ``0.2 <= alpha <= 2``, ``-50 <= z <= 5``, where the
values agree with numerical Laplace inversion in high precision to 1e-10;
outside it an :class:`~voldisc.errors.AccuracyWarning` is issued.  Smaller
orders push the mass of the Laplace representation against ``s = 0`` and lose
digits there.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
import scipy.integrate
import scipy.linalg
from numpy.typing import ArrayLike, NDArray
from scipy.special import erfcx, gammaln, rgamma

from .errors import AccuracyWarning, ConvergenceError, DomainError, UnsupportedInstanceError
from .fracdiff import FracOrder
from .linopspace import LinOp
from .seqkernel import (Decay, GridSequence, KernelSpec, _rising_sequence,
                        register_kernel_kind)

__all__ = [
    "mittag_leffler",
    "MLFamily",
    "ml_resolvent",
    "mild_residual",
    "growth_certificate",
    "graded_grid",
    "caputo_kernel",
    "caputo_multi_kernel",
]

_BOX_ALPHA = (0.2, 2.0)
_BOX_Z = (-50.0, 5.0)


# {{{ Mittag-Leffler function


def _series_double(alpha: float, beta: float, z: float) -> float:
    total = 0.0
    k = 0
    while k < 20000:
        lg = gammaln(alpha * k + beta)
        if k == 0:
            term = math.exp(-lg)
        elif z == 0:
            term = 0.0
        else:
            # log space: z**k alone overflows long before the quotient does
            logt = k * math.log(abs(z)) - lg
            if logt > 709.0:
                return math.inf
            term = math.exp(logt) * (-1.0 if z < 0 and k % 2 else 1.0)
        total += term
        if k > 2:
            # Gamma is log-convex, so the term ratio r decreases in k and the
            # remainder is at most |term| r / (1 - r)
            ratio = abs(z) * math.exp(lg - gammaln(alpha * (k + 1) + beta))
            if ratio < 1 and abs(term) * ratio / (1 - ratio) <= 1e-17 * max(abs(total), 1e-300):
                return total
        k += 1
    raise ConvergenceError(f"Mittag-Leffler series did not converge at z={z}")


def _series_mp(alpha: float, beta: float, z: float) -> float:
    lost = abs(z) ** (1.0 / alpha) / math.log(10.0) if z else 0.0
    dps = int(30 + lost * 1.2)
    with mpmath.workdps(dps):
        za = mpmath.mpf(z)
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        total = mpmath.mpf(0)
        eps = mpmath.mpf(10) ** (-25)
        k = 0
        while True:
            term = za**k * mpmath.rgamma(a * k + b)
            total += term
            if k > 5 and abs(term) < eps * max(abs(total), mpmath.mpf(10) ** (-dps + 5)):
                ratio = abs(za) * mpmath.gamma(a * k + b) / mpmath.gamma(a * (k + 1) + b)
                if ratio < 0.5:
                    break
            k += 1
            if k > 100000:
                raise ConvergenceError(f"Mittag-Leffler series did not converge at z={z}")
        return float(total)


def _laplace_repr(alpha: float, beta: float, z: float) -> float:
    # 0 < alpha < 1, z = -t^alpha < 0:
    #   E_alpha(-t^alpha) = int_0^inf e^{-rt} K(r) dr,
    #   K(r) = r^{alpha-1} sin(alpha pi) / (pi (r^{2 alpha} + 2 r^alpha cos(alpha pi) + 1)),
    # and t^{alpha-1} E_{alpha,alpha}(-t^alpha) is the same transform with
    # r^alpha in place of r^{alpha-1}.
    t = (-z) ** (1.0 / alpha)
    s_, c_ = math.sin(alpha * math.pi), math.cos(alpha * math.pi)
    power = alpha - 1.0 if beta == 1.0 else alpha

    def smooth(s: float) -> float:
        # substitute r = s / t so that the exponential weight is e^{-s}; the
        # factor s^power is split off to treat the singularity at s = 0
        ra = (s / t) ** alpha
        return math.exp(-s) * t ** (-power) * s_ / (math.pi * (ra * ra + 2.0 * ra * c_ + 1.0)) / t

    def integrand(s: float) -> float:
        return smooth(s) * s**power

    # the integrand has an integrable power singularity at s = 0 (beta = 1)
    # and a peak near r = 1, i.e. s = t; the weight e^{-s} puts nearly all
    # mass below s = 60, so the breakpoints follow that scale and the peak
    # only matters when it lies inside it
    brk = [0.0, min(1.0, t), 5.0, 15.0, 30.0, 60.0]
    if t < 60.0:
        brk += [t, t + 40.0]
    brk = sorted(set(brk))
    total = 0.0
    for lo, hi in zip(brk[:-1], brk[1:]):
        if hi <= lo:
            continue
        if lo == 0.0 and power < 0:
            # integrate the smooth factor against the weight s^power
            val, _ = scipy.integrate.quad(smooth, lo, hi,
                                          weight="alg", wvar=(power, 0.0), limit=200,
                                          epsabs=1e-16, epsrel=1e-13)
        else:
            val, _ = scipy.integrate.quad(integrand, lo, hi, limit=200,
                                          epsabs=1e-16, epsrel=1e-13)
        total += val
    tail, _ = scipy.integrate.quad(integrand, brk[-1], math.inf, limit=200,
                                   epsabs=1e-18, epsrel=1e-12)
    total += tail
    if beta == 1.0:
        return total
    return total * t ** (1.0 - alpha)


def mittag_leffler(alpha: float, z: float, beta: float = 1.0) -> float:
    r"""Two-parameter Mittag-Leffler function :math:`E_{\alpha,\beta}(z)` for real *z*.

    ``beta`` defaults to one, giving :math:`E_{\alpha}(z) = \sum_k z^k / \Gamma(\alpha k + 1)`.
    """
    if not alpha > 0:
        raise DomainError(f"Mittag-Leffler order must be positive: {alpha}")
    alpha, beta, z = float(alpha), float(beta), float(z)
    if not (_BOX_ALPHA[0] <= alpha <= _BOX_ALPHA[1] and _BOX_Z[0] <= z <= _BOX_Z[1]):
        warnings.warn(f"E_{{{alpha},{beta}}}({z}) lies outside the validated box "
                      f"alpha in [0.2, 2], z in [-50, 5]", AccuracyWarning, stacklevel=2)
    if alpha == 1.0 and beta == 1.0:
        return math.exp(z)
    if alpha == 2.0 and beta == 1.0:
        return math.cosh(math.sqrt(z)) if z >= 0 else math.cos(math.sqrt(-z))
    if alpha == 0.5 and beta == 1.0:
        return float(erfcx(-z))
    if alpha == 0.5 and beta == 0.5:
        return 1.0 / math.sqrt(math.pi) + z * float(erfcx(-z))
    if z >= 0 or abs(z) <= 1.0:
        return _series_double(alpha, beta, z)
    if alpha < 1.0 and beta in (1.0, alpha):
        return _laplace_repr(alpha, beta, z)
    return _series_mp(alpha, beta, z)


# }}}


# {{{ matrix families


def _eig_real(A: NDArray, tol: float = 1e8) -> tuple[NDArray, NDArray, NDArray]:
    lam, V = np.linalg.eig(A)
    if np.linalg.matrix_rank(V) < A.shape[0] or np.linalg.cond(V) > tol:
        raise UnsupportedInstanceError(
            "the operator is not diagonalizable within the conditioning tolerance")
    if np.max(np.abs(lam.imag), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(lam)))):
        raise UnsupportedInstanceError("only operators with real spectrum are supported")
    lam = lam.real
    V = V.real if np.max(np.abs(V.imag), initial=0.0) == 0 else V
    if np.iscomplexobj(V):
        # real eigenvalues of a real matrix admit real eigenvectors
        V = np.real_if_close(V, tol=1e6)
    return lam, V, np.linalg.inv(V)


@dataclass(frozen=True, eq=False)
class MLFamily:
    """A Mittag-Leffler family ``t -> T(t)`` for a diagonalizable matrix ``A``.

    ``kind`` selects the Caputo solution family (``"solution"``) or the
    Riemann–Liouville family (``"resolvent"``); see the module docstring.
    ``growth`` is an optional pair ``(M, rate)`` with ``||T(t)|| <= M e^{rate t}``.
    """

    A: LinOp
    alpha: float
    kind: str = "solution"
    growth: tuple[float, float] | None = None
    _eig: tuple = field(default=(), repr=False)

    def __post_init__(self) -> None:
        A = self.A if isinstance(self.A, LinOp) else LinOp(np.asarray(self.A))
        object.__setattr__(self, "A", A)
        FracOrder(self.alpha)
        if self.kind not in ("solution", "resolvent"):
            raise DomainError(f"unknown family kind {self.kind!r}")
        if self.alpha == 1.0 and self.kind == "solution":
            object.__setattr__(self, "_eig", ())
        else:
            object.__setattr__(self, "_eig", _eig_real(A.matrix))

    @property
    def dim(self) -> int:
        return self.A.dim

    def scalar(self, lam: float, t: float) -> float:
        """The family for the ``1 x 1`` operator ``lam``."""
        a = self.alpha
        if t < 0:
            raise DomainError(f"t must be nonnegative: {t}")
        if self.kind == "solution":
            return mittag_leffler(a, -lam * t**a) if t else 1.0
        if t == 0:
            if a < 1:
                raise DomainError("the Riemann-Liouville family is singular at t = 0")
            return 1.0 if a == 1 else 0.0
        return t ** (a - 1.0) * mittag_leffler(a, -lam * t**a, a)

    def __call__(self, t: float) -> NDArray:
        if not self._eig:
            return scipy.linalg.expm(-t * self.A.matrix)
        lam, V, Vinv = self._eig
        diag = np.array([self.scalar(l, t) for l in lam])
        return (V * diag) @ Vinv

    def with_growth(self, M: float, rate: float) -> MLFamily:
        return MLFamily(self.A, self.alpha, self.kind, (float(M), float(rate)))


def ml_resolvent(A: LinOp | ArrayLike, alpha: float, t: float,
                 kind: str = "solution") -> NDArray:
    """``E_alpha(-t^alpha A)`` (or the Riemann–Liouville variant) by spectral calculus."""
    return MLFamily(A if isinstance(A, LinOp) else LinOp(np.asarray(A)), alpha, kind)(t)


def graded_grid(T: float, n: int, grading: float = 1.0) -> NDArray[np.float64]:
    """Points ``T (i/n)^grading`` for ``i = 0..n``, clustered at the origin."""
    return T * (np.arange(n + 1) / n) ** grading


def _pow_diff(b: NDArray, a: NDArray, p: float) -> NDArray:
    # b^p - a^p without cancellation for 0 <= a <= b
    out = np.empty_like(b)
    small = a <= 0
    out[small] = b[small] ** p
    big = ~small
    out[big] = a[big] ** p * np.expm1(p * np.log1p((b[big] - a[big]) / a[big]))
    return out


def _product_weights(grid: NDArray, alpha: float) -> NDArray:
    """Matrix ``W`` with ``(W @ phi)[n] = int_0^{t_n} g_alpha(t_n - s) phi(s) ds``
    for ``phi`` piecewise linear on *grid*."""
    N = grid.size
    W = np.zeros((N, N))
    g = math.exp(-gammaln(alpha))
    for n in range(1, N):
        tn = grid[n]
        tj, tj1 = grid[:n], grid[1:n + 1]
        h = tj1 - tj
        a, b = tn - tj1, tn - tj
        I0 = _pow_diff(b, a, alpha) / alpha
        I1 = _pow_diff(b, a, alpha + 1.0) / (alpha + 1.0)
        left = (I1 - a * I0) / h
        right = (b * I0 - I1) / h
        W[n, :n] += g * left
        W[n, 1:n + 1] += g * right
    return W


def mild_residual(family: MLFamily, grid: ArrayLike | None = None, T: float = 10.0,
                  n: int = 1000) -> float:
    r"""Largest norm of :math:`T(t) - I + A (g_\alpha \ast T)(t)` over a grid.

    The convolution is computed by product integration of the piecewise
    linear interpolant on the grid, which is graded towards ``t = 0`` by
    default to resolve the :math:`t^{\alpha}` behaviour there.  Only the
    Caputo solution family is covered.
    """
    if family.kind != "solution":
        raise UnsupportedInstanceError("the mild form is implemented for the solution family only")
    if grid is None:
        grid = graded_grid(T, n, min(2.0 / family.alpha, 4.0) if family.alpha < 1 else 1.0)
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must start at 0 and increase strictly")
    if not np.any(family.A.matrix):
        return 0.0
    vals = np.stack([family(t) for t in grid])
    W = _product_weights(grid, family.alpha)
    conv = np.einsum("nj,jab->nab", W, vals)
    d = family.dim
    res = vals - np.eye(d) + np.einsum("ab,nbc->nac", family.A.matrix, conv)
    return float(np.max(np.linalg.norm(res, ord=2, axis=(1, 2))))


def growth_certificate(family: Callable[[float], ArrayLike], grid: ArrayLike,
                       target_c: float) -> tuple[float, bool]:
    r"""Fit ``M`` with :math:`\|T(t)\| \le M e^{(1-c) t}` on the grid.

    ``M`` is the maximum of :math:`\|T(t)\| e^{-(1-c)t}` (at least one).  The
    bound passes when the weighted norm no longer grows over the last tenth of
    the grid, i.e. its maximum there does not exceed the maximum before.
    """
    if not 0 < target_c < 1:
        raise DomainError(f"c must lie in (0, 1): {target_c}")
    grid = np.asarray(grid, dtype=float)
    rate = 1.0 - target_c
    weighted = np.array([np.linalg.norm(np.atleast_2d(family(t)), 2) * math.exp(-rate * t)
                         for t in grid])
    M = max(1.0, float(np.max(weighted)))
    cut = max(1, int(0.9 * grid.size))
    early = float(np.max(weighted[:cut]))
    late = float(np.max(weighted[cut:])) if cut < grid.size else 0.0
    return M, bool(late <= early * (1.0 + 1e-12))


# }}}


# {{{ kernels derived from Caputo initial data


def caputo_kernel(alpha: float, m: int | None = None) -> KernelSpec:
    r"""Kernel ``k(v) = (-1)^{v+m+1} / (v+m)! (alpha-1)(alpha-2)...(alpha-v-m)``.

    It equals :math:`-k^{1-\alpha}(v+m)` and carries the initial value of a
    Caputo problem into the discrete equation.
    """
    m = math.ceil(alpha) if m is None else int(m)
    return KernelSpec("caputo", (alpha, m))


def caputo_multi_kernel(k: int, alphas: Sequence[float],
                        global_alpha: float | None = None) -> KernelSpec:
    r"""Kernel for the initial value of order *k* in a multi-term Caputo problem.

    .. math::

        k(v) = \sum_{j : m_j - 1 \ge k} \frac{(-1)^{v+m_j+1}}{(v+m_j)!}
               \prod_{i=1}^{v+m_j} (\gamma_j - k - i),

    where ``gamma_j = alphas[j]`` and ``m_j = ceil(alphas[j])``.  When
    *global_alpha* is given, ``gamma_j`` is that single value for every
    summand instead.
    """
    mode = 0.0 if global_alpha is None else 1.0
    g = 0.0 if global_alpha is None else float(global_alpha)
    return KernelSpec("caputo-multi", (float(k), mode, g, *map(float, alphas)))


def _caputo_terms(spec: KernelSpec) -> list[tuple[float, int]]:
    """List of ``(beta, m)`` with the kernel equal to ``-sum k^beta(v + m)``."""
    if spec.kind == "caputo":
        alpha, m = spec.params
        return [(1.0 - alpha, int(m))]
    k, mode, g, *alphas = spec.params
    terms = []
    for a in alphas:
        m = math.ceil(a)
        if m - 1 >= k:
            gamma = g if mode else a
            terms.append((1.0 + k - gamma, m))
    return terms


def _seq_caputo(spec: KernelSpec, horizon: int) -> GridSequence:
    out = np.zeros(horizon + 1)
    for beta, m in _caputo_terms(spec):
        out -= _rising_sequence(beta, horizon + m)[m:]
    # |k^beta(v)| behaves like v^{beta-1}; the decay below is a power-law fit
    # through the last value and is a heuristic
    betas = [b for b, _ in _caputo_terms(spec)]
    if not betas or not np.any(out):
        return GridSequence(out, Decay.zero())
    p = 1.0 - max(betas)
    if p <= 0:
        return GridSequence(out, Decay.bounded(float(np.max(np.abs(out)))) if p == 0 else None)
    return GridSequence(out, Decay.algebraic(p, abs(out[-1]), offset=max(horizon, 1)))


def _sum_caputo(spec: KernelSpec, start: int) -> tuple[float, bool]:
    horizon = max(start, 0) + 2000
    seq = _seq_caputo(spec, horizon)
    head = float(np.sum(np.abs(seq.values[max(start, 0):])))
    if seq.decay is None:
        return math.inf, False
    if seq.decay.kind == "zero":
        return head, True
    return head + seq.decay.sum_from(1), False


register_kernel_kind("caputo", _seq_caputo, _sum_caputo)
register_kernel_kind("caputo-multi", _seq_caputo, _sum_caputo)


# }}}
