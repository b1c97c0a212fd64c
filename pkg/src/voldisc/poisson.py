r"""Poisson-type transform from continuous families to discrete ones.

For a continuous family :math:`S(t)` with :math:`\|S(t)\| \le M e^{r t}`
and :math:`a > r` the transform

.. math::

    S_{a,\omega}(v) = \int_0^{\infty} e^{-a t} \frac{(\omega t)^v}{v!} S(t)\, dt

is computed after the substitution :math:`s = a t`:

.. math::

    S_{a,\omega}(v) = \frac{1}{a}\Bigl(\frac{\omega}{a}\Bigr)^{v}
        \int_0^{\infty} \frac{s^v e^{-s}}{v!} S(s / a)\, ds .

The remaining integral has exactly the generalized Laguerre weight.  Two
schemes are available:

* ``generalized-laguerre``: Gauss rule for the weight :math:`s^v e^{-s}`
  from the Golub–Welsch eigenproblem, with the node count doubled until two
  consecutive rules agree to the target tolerance.  Best for smooth families.
* ``composite-adaptive``: adaptive Gauss–Kronrod on ``[0, S]`` (vector valued,
  via :func:`scipy.integrate.quad_vec`) plus a tail bound from the growth
  declaration.  Needed for families that are singular at ``t = 0`` and for
  sampled families.

The transform turns Laplace convolution into the Cauchy product:
:math:`(h \ast g)_{a,\omega} = h_{a,\omega} \ast_0 g_{a,\omega}` up to the
factor conventions above, which is what makes the discrete resolvent
identities hold.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammainc, gammaincc, gammaln

from .errors import ConvergenceError, DomainError, ShapeError
from .resolvent import Residuals, _as_linop, _seq_matrices
from .seqkernel import GridSequence, _cauchy, element_norms

__all__ = [
    "QuadratureSpec",
    "ContinuousFamily",
    "laguerre_rule",
    "poisson_scalar",
    "poisson_family",
    "poisson_family_with_errors",
    "poisson_primitive",
    "verify_transformed_identity",
    "partial_integration_forms",
    "thread_count",
]

_MAX_NODES = 1024


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature settings shared by every transform of one computation.

    ``nodes`` is the starting node count of the Laguerre scheme, ``target_tol``
    the requested accuracy relative to ``max(1, |value|)``, ``cutoff`` an
    optional upper limit ``T_max`` in ``t`` for the composite scheme.
    """

    scheme: str = "generalized-laguerre"
    nodes: int = 32
    target_tol: float = 1e-12
    cutoff: float | None = None

    def __post_init__(self) -> None:
        if self.scheme not in ("generalized-laguerre", "composite-adaptive"):
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")
        if self.nodes < 8:
            raise DomainError("at least 8 quadrature nodes are required")
        if not self.target_tol > 0:
            raise DomainError("target tolerance must be positive")

    def with_tol(self, tol: float) -> QuadratureSpec:
        return QuadratureSpec(self.scheme, self.nodes, tol, self.cutoff)


@dataclass(frozen=True, eq=False)
class ContinuousFamily:
    """A continuous operator family ``t -> T(t)`` given by an evaluator.

    ``growth = (M, rate)`` declares ``||T(t)|| <= M e^{rate t}``.  ``kind`` is
    informational (``semigroup``, ``ml_resolvent``, ``sampled-grid`` or
    ``function``).  ``serial`` marks evaluators that must not be called from
    several threads at once; ``singular`` marks families unbounded at
    ``t = 0``, which the Laguerre scheme cannot integrate accurately.
    """

    evaluator: Callable[[float], ArrayLike]
    dim: int
    growth: tuple[float, float] | None = None
    kind: str = "function"
    serial: bool = False
    singular: bool = False
    samples: tuple[NDArray, NDArray] | None = field(default=None, repr=False)

    def __call__(self, t: float) -> NDArray:
        out = np.asarray(self.evaluator(t))
        if out.ndim == 0:
            out = out.reshape(1, 1)
        return out

    @classmethod
    def constant(cls, matrix: ArrayLike) -> ContinuousFamily:
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(lambda t: m, m.shape[0], (float(np.linalg.norm(m, 2)) or 1.0, 0.0), "function")

    @classmethod
    def scalar(cls, fn: Callable[[float], float], growth: tuple[float, float] | None = None,
               singular: bool = False) -> ContinuousFamily:
        return cls(lambda t: np.array([[fn(t)]]), 1, growth, "function", singular=singular)

    @classmethod
    def from_samples(cls, t: ArrayLike, values: ArrayLike,
                     growth: tuple[float, float] | None = None) -> ContinuousFamily:
        """Piecewise linear family through samples ``values[i] = T(t[i])``."""
        t = np.asarray(t, dtype=float)
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None, None]
        if vals.ndim == 2:
            d = int(round(math.sqrt(vals.shape[1])))
            if d * d != vals.shape[1]:
                raise ShapeError("sample rows must hold d*d matrix entries")
            vals = vals.reshape(-1, d, d)
        if t.ndim != 1 or t.size != vals.shape[0] or t.size < 2:
            raise ShapeError("need one matrix per sample time and at least two samples")
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise DomainError("sample times must start at 0 and increase strictly")
        if growth is None:
            # the best exponential bound consistent with the samples themselves
            growth = (float(max(1.0, np.max(element_norms(vals)))), 0.0)

        def evaluate(s: float) -> NDArray:
            if s >= t[-1]:
                return vals[-1]
            i = int(np.searchsorted(t, s, side="right")) - 1
            w = (s - t[i]) / (t[i + 1] - t[i])
            return (1.0 - w) * vals[i] + w * vals[i + 1]

        return cls(evaluate, vals.shape[1], growth, "sampled-grid", samples=(t, vals))

    @classmethod
    def from_file(cls, path: str, delimiter: str | None = None,
                  growth: tuple[float, float] | None = None) -> ContinuousFamily:
        """Read ``t, entries...`` rows (row-major matrix entries) from a text file."""
        data = np.loadtxt(path, delimiter=delimiter, comments="#", ndmin=2)
        return cls.from_samples(data[:, 0], data[:, 1:], growth)

    def check_growth(self, grid: ArrayLike) -> bool:
        """Whether ``||T(t)|| e^{-rate t} <= M (1 + 1e-6)`` on the grid."""
        if self.growth is None:
            return False
        M, rate = self.growth
        return all(np.linalg.norm(self(t), 2) * math.exp(-rate * t) <= M * (1 + 1e-6)
                   for t in np.asarray(grid, dtype=float))

    def integrated(self, points: int = 4001, horizon: float | None = None) -> ContinuousFamily:
        """The primitive ``t -> int_0^t T(s) ds`` as a sampled family.

        Sampled families are integrated on their own grid by the cumulative
        trapezoid rule; other families are sampled on a uniform grid first.
        """
        if self.samples is not None:
            t, vals = self.samples
        else:
            T = horizon if horizon is not None else 60.0
            t = np.linspace(0.0, T, points)
            vals = np.stack([self(s) for s in t])
        prim = scipy.integrate.cumulative_trapezoid(vals, t, axis=0, initial=0.0)
        M, rate = self.growth if self.growth is not None else (1.0, 0.0)
        g = (M / rate, rate) if rate > 0 else (M * (1.0 + t[-1]), 0.0)
        return ContinuousFamily.from_samples(t, prim, g)


# {{{ quadrature rules


_RULES: dict[tuple[int, int], tuple[NDArray, NDArray]] = {}


def laguerre_rule(v: float, n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Gauss rule with ``n`` nodes for the weight ``s^v e^{-s}`` on ``(0, inf)``.

    The weights are normalized to sum to one, i.e. they integrate against the
    probability density ``s^v e^{-s} / Gamma(v + 1)``.  Computed by the
    Golub–Welsch method from the Jacobi matrix with diagonal ``2k + 1 + v`` and
    off-diagonal ``sqrt(k (k + v))``.
    """
    key = (float(v), int(n))
    if key in _RULES:
        return _RULES[key]
    k = np.arange(n, dtype=float)
    diag = 2.0 * k + 1.0 + v
    off = np.sqrt(k[1:] * (k[1:] + v))
    nodes, vecs = eigh_tridiagonal(diag, off)
    weights = vecs[0] ** 2
    _RULES[key] = (nodes, weights)
    return nodes, weights


def _prefactor(a: float, omega: float, v: int) -> float:
    # (omega/a)^v / a in log space
    sign = -1.0 if (omega < 0 and v % 2) else 1.0
    return sign * math.exp(v * math.log(abs(omega) / a) - math.log(a))


def _check_rates(a: float, omega: float, growth: tuple[float, float] | None) -> None:
    if not a > 0:
        raise DomainError(f"the transform needs a > 0, got {a}")
    if omega == 0:
        raise DomainError("omega must be nonzero")
    if growth is not None and a <= growth[1]:
        raise ConvergenceError(
            f"a = {a} does not exceed the growth rate {growth[1]}; the transform diverges")


def _laguerre(h: Callable[[float], NDArray], a: float, v: int,
              q: QuadratureSpec) -> tuple[NDArray, float]:
    n = q.nodes

    def rule(n: int) -> NDArray:
        x, w = laguerre_rule(v, n)
        return sum(wi * h(xi / a) for xi, wi in zip(x, w) if wi > 0)

    prev = rule(n)
    while True:
        n *= 2
        cur = rule(n)
        err = float(np.max(np.abs(cur - prev)))
        if err <= q.target_tol * max(1.0, float(np.max(np.abs(cur)))):
            return cur, err
        if n >= _MAX_NODES:
            raise ConvergenceError(
                f"Laguerre rule did not reach {q.target_tol:.1e} with {n} nodes "
                f"(last change {err:.3e}); the family may be singular or growing")
        prev = cur


def _composite(h: Callable[[float], NDArray], a: float, v: int, q: QuadratureSpec,
               growth: tuple[float, float] | None, limit_s: float | None,
               singular: bool) -> tuple[NDArray, float]:
    lg = gammaln(v + 1.0)

    def density(s: float) -> float:
        if s <= 0:
            return 1.0 if v == 0 else 0.0
        return math.exp(v * math.log(s) - s - lg)

    def f(s: float) -> NDArray:
        return density(s) * h(s / a)

    tol = q.target_tol
    # choose the truncation point from the growth declaration
    if growth is not None:
        M, rate = growth
        kappa = 1.0 - max(rate, 0.0) / a
        S = v + 30.0 + 10.0 * math.sqrt(v + 1.0)
        for _ in range(200):
            tail = M * kappa ** (-(v + 1.0)) * gammaincc(v + 1.0, kappa * S)
            if tail <= 0.1 * tol:
                break
            S *= 1.5
        else:
            raise ConvergenceError("no truncation point meets the tail bound")
    else:
        S = v + 60.0 + 20.0 * math.sqrt(v + 1.0)
        tail = math.nan
    if q.cutoff is not None:
        S = min(S, a * q.cutoff)
    if limit_s is not None and S > limit_s:
        if growth is None:
            raise ConvergenceError("sampled family is too short and has no growth declaration")
        M, rate = growth
        kappa = 1.0 - max(rate, 0.0) / a
        S = limit_s
        tail = M * kappa ** (-(v + 1.0)) * gammaincc(v + 1.0, kappa * S)
        if tail > tol:
            raise ConvergenceError(
                f"sample grid ends at t = {limit_s / a:.4g}; tail bound {tail:.2e} exceeds {tol:.1e}")
    pts = sorted({p for p in (1.0, max(v - 5.0 * math.sqrt(v + 1.0), 0.0), float(v),
                              v + 5.0 * math.sqrt(v + 1.0)) if 0 < p < S})
    edges = [0.0, *pts, S]
    total = np.zeros_like(np.asarray(h(1.0), dtype=float))
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = scipy.integrate.quad_vec(f, lo, hi, epsabs=0.1 * tol, epsrel=0.1 * tol,
                                          limit=2000, norm="max")
        total = total + val
        err += float(e)
    if math.isfinite(tail):
        err += tail
    return np.asarray(total), err


def _transform(h: Callable[[float], NDArray], a: float, omega: float, v: int,
               q: QuadratureSpec, growth: tuple[float, float] | None = None,
               singular: bool = False, limit_t: float | None = None) -> tuple[NDArray, float]:
    _check_rates(a, omega, growth)
    if v < 0:
        raise DomainError(f"index must be nonnegative: {v}")
    pre = _prefactor(a, omega, v)
    # heuristic divergence probe for undeclared growth: the weighted integrand
    # must be negligible far beyond the Poisson mass
    if growth is None and limit_t is None:
        far = v + 200.0 + 20.0 * math.sqrt(v + 1.0)
        probe = float(np.max(np.abs(h(far / a)))) * math.exp(
            v * math.log(far) - far - gammaln(v + 1.0))
        if not math.isfinite(probe) or probe > 1e-3:
            raise ConvergenceError(
                f"the integrand does not decay at s = {far:.0f}; a = {a} is below the growth rate")
    if q.scheme == "generalized-laguerre" and not singular and limit_t is None:
        val, err = _laguerre(h, a, v, q)
    else:
        val, err = _composite(h, a, v, q, growth, None if limit_t is None else a * limit_t,
                              singular)
    return pre * val, abs(pre) * err


def poisson_scalar(k: Callable[[float], float], a: float, omega: float, v: int,
                   q: QuadratureSpec | None = None,
                   growth: tuple[float, float] | None = None) -> float:
    r""":math:`\int_0^\infty e^{-at} (\omega t)^v / v!\, k(t)\, dt` for a scalar function."""
    q = q or QuadratureSpec()
    val, _ = _transform(lambda t: np.asarray(k(t), dtype=float), a, omega, v, q, growth)
    return float(val)


def thread_count() -> int:
    """Worker count from ``VOLDISC_THREADS`` (default one)."""
    try:
        return max(1, int(os.environ.get("VOLDISC_THREADS", "1")))
    except ValueError:
        return 1


def poisson_family_with_errors(T: ContinuousFamily, a: float, omega: float, v_max: int,
                               q: QuadratureSpec | None = None,
                               threads: int | None = None) -> tuple[GridSequence, NDArray]:
    """Transform of a family for ``v = 0..v_max`` with per-index error estimates."""
    q = q or QuadratureSpec()
    _check_rates(a, omega, T.growth)
    limit_t = None
    if T.samples is not None:
        limit_t = float(T.samples[0][-1])
    workers = 1 if T.serial else (threads or thread_count())

    def one(v: int) -> tuple[NDArray, float]:
        return _transform(T, a, omega, v, q, T.growth, T.singular, limit_t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(v_max + 1)))
    else:
        results = [one(v) for v in range(v_max + 1)]
    values = np.stack([r[0] for r in results])
    errors = np.array([r[1] for r in results])
    return GridSequence(values), errors


def poisson_family(T: ContinuousFamily, a: float, omega: float, v_max: int,
                   q: QuadratureSpec | None = None, threads: int | None = None) -> GridSequence:
    r"""Matrices :math:`S_{a,\omega}(v)` for ``v = 0..v_max``."""
    return poisson_family_with_errors(T, a, omega, v_max, q, threads)[0]


def poisson_primitive(T: ContinuousFamily, k: ContinuousFamily | Callable[[float], float],
                      a: float, omega: float, v_max: int,
                      q: QuadratureSpec | None = None) -> tuple[GridSequence, GridSequence]:
    r"""Transforms of the primitives :math:`U(t) = \int_0^t S` and :math:`\Theta(t) = \int_0^t k`.

    For evaluator families Fubini's theorem gives

    .. math::

        U_{a,\omega}(v) = \frac{1}{a}\Bigl(\frac{\omega}{a}\Bigr)^{v}
            \sum_{j=0}^{v} S_{a,a}(j),

    so only transforms of ``S`` itself are needed.  Sampled families are
    integrated by the cumulative trapezoid rule on their grid and then
    transformed.
    """
    q = q or QuadratureSpec()
    kf = k if isinstance(k, ContinuousFamily) else ContinuousFamily.scalar(k, (1.0, 0.0))
    out = []
    for fam in (T, kf):
        if fam.samples is not None:
            out.append(poisson_family(fam.integrated(), a, omega, v_max, q))
            continue
        base = poisson_family(fam, a, a, v_max, q).values
        csum = np.cumsum(base, axis=0)
        scale = np.array([_prefactor(a, omega, v) for v in range(v_max + 1)])
        out.append(GridSequence(csum * scale.reshape(-1, 1, 1)))
    U, Theta = out
    return U, GridSequence(Theta.values[:, 0, 0]) if Theta.values.shape[1:] == (1, 1) else Theta


# }}}


# {{{ verification


def verify_transformed_identity(S_aw: GridSequence, k_aw: GridSequence, A_aw: GridSequence,
                B, C, tol: float = 1e-6) -> Residuals:
    r"""Residual of :math:`B S_{a,\omega}(v) = k_{a,\omega}(v) C + (S_{a,\omega} \ast_0 A_{a,\omega})(v)`."""
    S = S_aw.values
    d = S.shape[1]
    V = S.shape[0] - 1
    A = _seq_matrices(A_aw, V, d)
    kv = np.asarray(k_aw.values if isinstance(k_aw, GridSequence) else k_aw)[: V + 1]
    if kv.ndim == 3:
        kv = kv[:, 0, 0]
    Bm = _as_linop(B).matrix
    Cm = _as_linop(C).matrix
    lhs = np.einsum("ab,vbc->vac", Bm, S)
    rhs = np.multiply.outer(kv, Cm) + _cauchy(S, A, V + 1)
    scale = np.maximum(np.linalg.norm(Bm, 2) * element_norms(S),
                       np.abs(kv) * np.linalg.norm(Cm, 2))
    scale = np.maximum(scale, _cauchy(element_norms(S), element_norms(A), V + 1))
    return Residuals(element_norms(lhs - rhs), scale, tol)


def partial_integration_forms(S_aw: GridSequence, k_aw: GridSequence, A_aw: GridSequence,
                             U_aw: GridSequence, B, C, a: float,
                             omega: float) -> tuple[Residuals, Residuals]:
    r"""Two forms of the identity linking ``S_{a,w}`` with the primitive transform.

    The first (derived) form is

    .. math::

        B S_{a,\omega}(v) = k_{a,\omega}(v) C + a (A_{a,\omega} \ast_0 U_{a,\omega})(v)
            - \omega (A_{a,\omega} \ast_0 U_{a,\omega})(v - 1),

    which follows from :math:`S = U'` and integration by parts.  The second
    form replaces the factors ``a`` and ``omega`` by ``a omega^v`` and
    ``omega^v (-1)^v``; it is returned for comparison only.  Both cover
    ``v >= 1``.
    """
    S = S_aw.values
    d = S.shape[1]
    V = S.shape[0] - 1
    A = _seq_matrices(A_aw, V, d)
    U = _seq_matrices(U_aw, V, d)
    kv = np.asarray(k_aw.values)[: V + 1]
    if kv.ndim == 3:
        kv = kv[:, 0, 0]
    Bm = _as_linop(B).matrix
    Cm = _as_linop(C).matrix
    AU = _cauchy(A, U, V + 1)
    base = np.einsum("ab,vbc->vac", Bm, S[1:]) - np.multiply.outer(kv[1:], Cm)
    derived = base - a * AU[1:] + omega * AU[:-1]
    v = np.arange(1, V + 1, dtype=float)
    wv = (omega ** v).reshape(-1, 1, 1)
    sign = ((-1.0) ** v).reshape(-1, 1, 1)
    displayed = base - a * wv * AU[1:] + wv * sign * AU[:-1]
    scale = np.maximum(element_norms(S[1:]), element_norms(AU[1:]))
    return (Residuals(element_norms(derived), scale, 1e-6, 1),
            Residuals(element_norms(displayed), scale, 1e-6, 1))


# }}}
