r"""Sequence kernel algebra.

This module holds the storage types for one-sided sequences (indexed by
:math:`\mathbb{N}_0`) and two-sided sequences (indexed by :math:`\mathbb{Z}`),
the Cesàro kernels

.. math::

    k^{\alpha}(v) = \frac{\Gamma(v + \alpha)}{\Gamma(\alpha)\, v!},
    \qquad k^{0} = \delta_0,

the one-sided Cauchy product :math:`(a \ast_0 b)(v) = \sum_{j=0}^{v} a(v-j) b(j)`
and the Weyl convolution :math:`(a \circ b)(v) = \sum_{l \le v} a(v-l) b(l)`.

Two-sided sequences are stored on a finite window and carry a :class:`Decay`
declaration for the part of the sequence left of the window.  Every Weyl
convolution returns, next to its values, a per-index upper bound on the
neglected part of the infinite sum.  Convolutions are direct sums; at the
problem sizes targeted here exact truncation accounting is worth more than
transform speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln

from .errors import CertificationError, DomainError, HorizonError, ShapeError

__all__ = [
    "Decay",
    "GridSequence",
    "BiSequence",
    "KernelSpec",
    "cesaro_kernel",
    "cesaro_sequence",
    "conv0",
    "weyl_conv",
    "exp_weight",
    "continuous_g",
    "element_norms",
    "fractional_difference_kernel",
    "register_kernel_kind",
]


# {{{ decay declarations


@dataclass(frozen=True)
class Decay:
    r"""Bound on the norm of a sequence outside its stored window.

    The distance :math:`d \ge 1` is measured from the window edge (to the left
    for two-sided sequences, to the right for one-sided sequences).  The
    supported kinds are

    * ``"zero"``: the sequence vanishes outside the window;
    * ``"geometric"``: :math:`\|x\| \le C \rho^{d}` with ``rate`` :math:`\rho < 1`;
    * ``"algebraic"``: :math:`\|x\| \le C (\ell / (\ell + d))^{p}` with
      ``rate`` :math:`p` and ``offset`` :math:`\ell`;
    * ``"bounded"``: :math:`\|x\| \le C`;
    * ``"constant"``: the sequence continues with the value at the window edge
      (only meaningful for two-sided sequences); ``bound`` is its norm;
    * ``"summable"``: only the total is known, :math:`\sum_{d \ge 1} \|x\| \le C`
      (so every single norm is at most ``C`` as well).
    """

    kind: str
    bound: float = 0.0
    rate: float = 0.0
    offset: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in {"zero", "geometric", "algebraic", "bounded", "constant", "summable"}:
            raise DomainError(f"unknown decay kind {self.kind!r}")
        if self.bound < 0 or not math.isfinite(self.bound):
            raise DomainError(f"decay bound must be finite and nonnegative: {self.bound}")
        if self.kind == "geometric" and not 0.0 <= self.rate < 1.0:
            raise DomainError(f"geometric decay needs a rate in [0, 1): {self.rate}")
        if self.kind == "algebraic" and (self.rate <= 0 or self.offset <= 0):
            raise DomainError("algebraic decay needs a positive exponent and offset")

    @classmethod
    def zero(cls) -> Decay:
        return cls("zero")

    @classmethod
    def geometric(cls, rate: float, bound: float) -> Decay:
        return cls("geometric", bound=float(bound), rate=float(rate))

    @classmethod
    def algebraic(cls, exponent: float, bound: float, offset: float = 1.0) -> Decay:
        return cls("algebraic", bound=float(bound), rate=float(exponent), offset=float(offset))

    @classmethod
    def bounded(cls, bound: float) -> Decay:
        return cls("bounded", bound=float(bound))

    @classmethod
    def constant(cls, bound: float) -> Decay:
        return cls("constant", bound=float(bound))

    @classmethod
    def tail_sum(cls, total: float) -> Decay:
        return cls("summable", bound=float(total))

    def term(self, d: ArrayLike) -> NDArray[np.float64]:
        """Bound on the norm at distance *d* (elementwise, ``d >= 1``)."""
        d = np.asarray(d, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(d)
        if self.kind == "geometric":
            return self.bound * self.rate**d
        if self.kind == "algebraic":
            return self.bound * (self.offset / (self.offset + d)) ** self.rate
        return np.full_like(d, self.bound)

    def sup_from(self, d0: int) -> float:
        """Bound on the norm for every distance ``d >= d0``."""
        return float(self.term(max(int(d0), 1)))

    def sum_from(self, d0: int) -> float:
        """Bound on the sum of norms over distances ``d >= d0``."""
        d0 = max(int(d0), 1)
        if self.kind == "zero" or self.bound == 0.0:
            return 0.0
        if self.kind == "geometric":
            return self.bound * self.rate**d0 / (1.0 - self.rate)
        if self.kind == "algebraic":
            p = self.rate
            if p <= 1.0:
                return math.inf
            x0 = self.offset + d0
            # sum_{d >= d0} f(d) <= f(d0) + int_{d0}^inf f
            return self.bound * self.offset**p * (x0 ** (-p) + x0 ** (1.0 - p) / (p - 1.0))
        if self.kind == "summable":
            return self.bound
        return math.inf

    def summable(self) -> bool:
        return math.isfinite(self.sum_from(1))

    def scaled(self, factor: float) -> Decay:
        return replace(self, bound=self.bound * abs(float(factor)))


# }}}


# {{{ storage types


def element_norms(values: NDArray) -> NDArray[np.float64]:
    """Norm of every element of a stacked array of scalars, vectors or matrices.

    Scalars use the absolute value, vectors the Euclidean norm and matrices the
    spectral norm (the operator norm induced by the Euclidean norm).
    """
    values = np.asarray(values)
    if values.ndim == 1:
        return np.abs(values).astype(float)
    if values.ndim == 2:
        return np.linalg.norm(values, axis=1)
    if values.ndim == 3:
        if values.shape[0] == 0:
            return np.zeros(0)
        return np.linalg.norm(values, ord=2, axis=(1, 2))
    raise ShapeError(f"unsupported element rank {values.ndim - 1}")


def _as_values(values: ArrayLike) -> NDArray:
    arr = np.array(values)
    if arr.dtype == object:
        raise ShapeError("all elements must share one shape")
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not (np.issubdtype(arr.dtype, np.floating) or np.issubdtype(arr.dtype, np.complexfloating)):
        arr = arr.astype(float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridSequence:
    """A sequence on ``0..horizon`` of scalars, vectors or matrices.

    ``values[v]`` is the element at index ``v``.  The optional *decay* bounds
    the sequence for indices beyond the horizon; it is used only when a
    truncation certificate needs the unseen part.
    """

    values: NDArray
    decay: Decay | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_values(self.values))
        if self.values.shape[0] == 0:
            raise HorizonError("a GridSequence needs at least one value")

    @classmethod
    def from_function(cls, fn: Callable[[int], ArrayLike], horizon: int,
                      decay: Decay | None = None) -> GridSequence:
        return cls(np.array([fn(v) for v in range(horizon + 1)]), decay)

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    @property
    def elem_shape(self) -> tuple[int, ...]:
        return tuple(self.values.shape[1:])

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, v: int) -> NDArray:
        return self.values[v]

    def norms(self) -> NDArray[np.float64]:
        return element_norms(self.values)

    def truncate(self, horizon: int) -> GridSequence:
        if horizon > self.horizon:
            raise HorizonError(f"cannot extend horizon {self.horizon} to {horizon}")
        return GridSequence(self.values[: horizon + 1], self.decay if horizon == self.horizon else None)

    def with_decay(self, decay: Decay | None) -> GridSequence:
        return GridSequence(self.values, decay)


@dataclass(frozen=True, eq=False)
class BiSequence:
    """A two-sided sequence stored on the window ``lo..hi``.

    Parameters
    ----------
    values
        Stacked elements, ``values[i]`` is the element at index ``lo + i``.
    lo
        Left window bound (``-N⁻``).
    decay
        Bound on the sequence left of the window; ``None`` means unknown.
    tail
        Per-index certified bound on the error already contained in
        *values* (for instance truncated infinite sums).  Defaults to zero.
    """

    values: NDArray
    lo: int
    decay: Decay | None = None
    tail: NDArray[np.float64] | None = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_values(self.values))
        object.__setattr__(self, "lo", int(self.lo))
        if self.values.shape[0] == 0:
            raise HorizonError("a BiSequence needs a nonempty window")
        if self.tail is None:
            tail = np.zeros(self.values.shape[0])
        else:
            tail = np.asarray(self.tail, dtype=float)
            if tail.shape != (self.values.shape[0],):
                raise ShapeError("tail must hold one bound per stored index")
        tail.setflags(write=False)
        object.__setattr__(self, "tail", tail)

    @classmethod
    def from_function(cls, fn: Callable[[int], ArrayLike], lo: int, hi: int,
                      decay: Decay | None = None) -> BiSequence:
        if hi < lo:
            raise HorizonError(f"window [{lo}, {hi}] is empty")
        return cls(np.array([fn(v) for v in range(lo, hi + 1)]), lo, decay)

    @property
    def hi(self) -> int:
        return self.lo + self.values.shape[0] - 1

    @property
    def window(self) -> tuple[int, int]:
        return self.lo, self.hi

    @property
    def indices(self) -> NDArray[np.int64]:
        return np.arange(self.lo, self.hi + 1)

    @property
    def elem_shape(self) -> tuple[int, ...]:
        return tuple(self.values.shape[1:])

    def __len__(self) -> int:
        return self.values.shape[0]

    def at(self, v: int) -> NDArray:
        if not self.lo <= v <= self.hi:
            raise HorizonError(f"index {v} outside window [{self.lo}, {self.hi}]")
        return self.values[v - self.lo]

    def norms(self) -> NDArray[np.float64]:
        return element_norms(self.values)

    def restrict(self, lo: int, hi: int) -> BiSequence:
        """Sub-window ``lo..hi``.  Cutting on the left forgets the decay."""
        if lo < self.lo or hi > self.hi or hi < lo:
            raise HorizonError(f"[{lo}, {hi}] is not inside [{self.lo}, {self.hi}]")
        i, j = lo - self.lo, hi - self.lo + 1
        decay = self.decay if lo == self.lo else None
        return BiSequence(self.values[i:j], lo, decay, self.tail[i:j])

    def shift(self, a: int) -> BiSequence:
        """The translate ``v -> u(v + a)``."""
        return BiSequence(self.values, self.lo - int(a), self.decay, self.tail)

    def with_decay(self, decay: Decay | None) -> BiSequence:
        return BiSequence(self.values, self.lo, decay, self.tail)


# }}}


# {{{ Cesàro kernels


def cesaro_kernel(alpha: float, v: int) -> float:
    r"""Cesàro kernel :math:`k^{\alpha}(v) = \Gamma(v+\alpha) / (\Gamma(\alpha) v!)`.

    Evaluated through log-Gamma differences, so large *v* do not overflow.
    For ``alpha == 0`` the delta convention :math:`k^0(v) = [v = 0]` is used.
    """
    if alpha < 0 or not math.isfinite(alpha):
        raise DomainError(f"Cesàro order must be nonnegative: {alpha}")
    if v < 0:
        raise DomainError(f"Cesàro kernel index must be nonnegative: {v}")
    if alpha == 0:
        return 1.0 if v == 0 else 0.0
    if v == 0:
        return 1.0
    return float(np.exp(gammaln(v + alpha) - gammaln(alpha) - gammaln(v + 1.0)))


def _rising_sequence(beta: float, horizon: int) -> NDArray[np.float64]:
    # k^beta(v) = prod_{i<v} (beta + i) / v!, valid for every real beta; the
    # running product of ratios (beta + v - 1) / v neither overflows nor
    # accumulates the cancellation error of log-Gamma differences.
    out = np.empty(horizon + 1)
    out[0] = 1.0
    if horizon:
        v = np.arange(1, horizon + 1, dtype=float)
        out[1:] = np.cumprod((beta + v - 1.0) / v)
    return out


def cesaro_sequence(alpha: float, horizon: int) -> GridSequence:
    """The values ``k^alpha(0..horizon)`` with a decay bound for the rest."""
    if alpha < 0 or not math.isfinite(alpha):
        raise DomainError(f"Cesàro order must be nonnegative: {alpha}")
    values = _rising_sequence(alpha, horizon)
    if alpha == 0:
        decay: Decay | None = Decay.zero()
    elif alpha <= 1:
        # nonincreasing for alpha <= 1
        decay = Decay.bounded(values[-1])
    else:
        decay = None
    return GridSequence(values, decay)


def fractional_difference_kernel(alpha: float, horizon: int) -> GridSequence:
    r"""Kernel that turns a lagged Weyl sum into a fractional difference.

    With :math:`m = \lceil \alpha \rceil` it is

    .. math::

        a(s) = \sum_{j=0}^{m} (-1)^{m-j} \binom{m}{j} k^{m-\alpha}(s + j - m),

    where :math:`k^{\beta}` vanishes at negative arguments, so that
    :math:`\sum_{l \le v+m} a(v+m-l) u(l) = (\Delta^{\alpha}_W u)(v)`.
    Its leading value is ``a(0) = 1``.
    """
    if alpha < 0:
        raise DomainError(f"difference order must be nonnegative: {alpha}")
    m = math.ceil(alpha)
    base = _rising_sequence(m - alpha, horizon + m) if m - alpha > 0 else \
        np.eye(1, horizon + m + 1)[0]
    out = np.zeros(horizon + 1)
    for j in range(m + 1):
        coef = (-1) ** (m - j) * math.comb(m, j)
        shift = m - j  # a(s) uses base(s - shift)
        out[shift:] += coef * base[: horizon + 1 - shift]
    if m == alpha:
        decay: Decay | None = Decay.zero()
    else:
        # |a(s)| behaves like s^{-1-alpha}; the bound below is the power law
        # through the last stored value and is a heuristic, not a proof.
        decay = Decay.algebraic(alpha + 1.0, abs(out[-1]), offset=max(horizon, 1))
    return GridSequence(out, decay)


# }}}


# {{{ kernel specifications


_KERNEL_KINDS: dict[str, Callable[["KernelSpec", int], GridSequence]] = {}
_KERNEL_SUMS: dict[str, Callable[["KernelSpec", int], tuple[float, bool]]] = {}


def register_kernel_kind(kind: str,
                         sequence: Callable[["KernelSpec", int], GridSequence],
                         abs_sum: Callable[["KernelSpec", int], tuple[float, bool]]) -> None:
    """Make a new :class:`KernelSpec` kind available.

    *sequence(spec, V)* returns the values on ``0..V``; *abs_sum(spec, s)*
    returns ``(sum_{v >= s} |a(v)|, rigorous)``.
    """
    _KERNEL_KINDS[kind] = sequence
    _KERNEL_SUMS[kind] = abs_sum


@dataclass(frozen=True)
class KernelSpec:
    """Declarative description of a scalar kernel on :math:`\\mathbb{N}_0`.

    ``kind`` is one of ``cesaro`` (``params = (alpha,)``), ``geometric``
    (``params = (c, r)`` meaning ``c r^v``), ``delta``, ``explicit``
    (``params`` holds the values, zero afterwards) and ``fdiff``
    (``params = (alpha,)``, see :func:`fractional_difference_kernel`).  Other
    modules register additional kinds.  ``omega`` multiplies the kernel by
    :math:`e^{-\\omega (v - \\text{shift})}`.
    """

    kind: str
    params: tuple[float, ...] = ()
    omega: float = 0.0
    shift: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in _KERNEL_KINDS:
            raise DomainError(f"unknown kernel kind {self.kind!r}")
        if self.kind in ("cesaro", "fdiff") and (len(self.params) != 1 or self.params[0] < 0):
            raise DomainError(f"{self.kind} kernel needs one nonnegative order")
        if self.kind == "geometric" and len(self.params) != 2:
            raise DomainError("geometric kernel needs (c, r)")
        if self.kind == "explicit" and not self.params:
            raise DomainError("explicit kernel needs at least one value")

    @classmethod
    def cesaro(cls, alpha: float) -> KernelSpec:
        return cls("cesaro", (alpha,))

    @classmethod
    def geometric(cls, c: float, r: float) -> KernelSpec:
        return cls("geometric", (c, r))

    @classmethod
    def delta(cls) -> KernelSpec:
        return cls("delta")

    @classmethod
    def explicit(cls, values: Iterable[float]) -> KernelSpec:
        return cls("explicit", tuple(values))

    @classmethod
    def fdiff(cls, alpha: float) -> KernelSpec:
        return cls("fdiff", (alpha,))

    def weighted(self, omega: float, shift: int = 0) -> KernelSpec:
        return replace(self, omega=self.omega + omega, shift=shift)

    def sequence(self, horizon: int) -> GridSequence:
        seq = _KERNEL_KINDS[self.kind](self, horizon)
        if self.omega:
            seq = exp_weight(seq, self.omega, self.shift)
        return seq

    def value(self, v: int) -> float:
        return float(self.sequence(v).values[v])

    def abs_sum(self, start: int = 0) -> tuple[float, bool]:
        """``(sum_{v >= start} |a(v)|, rigorous)``; ``inf`` if not summable."""
        if self.omega:
            # bounded kernels become geometric after weighting; fall back to a
            # numerical sum plus the weighted decay bound
            horizon = max(start, 1) + 400
            seq = self.sequence(horizon)
            head = float(np.sum(np.abs(seq.values[start:])))
            if seq.decay is None:
                return math.inf, False
            return head + seq.decay.sum_from(1), True
        return _KERNEL_SUMS[self.kind](self, start)

    def summable(self) -> bool:
        return math.isfinite(self.abs_sum(0)[0])

    def text(self) -> str:
        """Textual form understood by the scenario parser."""
        if self.kind == "delta":
            body = "delta"
        elif self.kind == "explicit":
            body = "explicit:[" + ",".join(repr(p) for p in self.params) + "]"
        else:
            body = f"{self.kind}:" + ",".join(repr(p) for p in self.params)
        if self.omega:
            body += f"@{self.omega!r},{self.shift}"
        return body


def _seq_cesaro(spec: KernelSpec, horizon: int) -> GridSequence:
    return cesaro_sequence(spec.params[0], horizon)


def _sum_cesaro(spec: KernelSpec, start: int) -> tuple[float, bool]:
    if spec.params[0] == 0:
        return (1.0 if start <= 0 else 0.0), True
    return math.inf, True


def _seq_geometric(spec: KernelSpec, horizon: int) -> GridSequence:
    c, r = spec.params
    values = c * r ** np.arange(horizon + 1, dtype=float)
    decay = Decay.geometric(abs(r), abs(values[-1])) if abs(r) < 1 else None
    return GridSequence(values, decay)


def _sum_geometric(spec: KernelSpec, start: int) -> tuple[float, bool]:
    c, r = spec.params
    if abs(r) >= 1:
        return (0.0 if c == 0 else math.inf), True
    return abs(c) * abs(r) ** max(start, 0) / (1.0 - abs(r)), True


def _seq_delta(spec: KernelSpec, horizon: int) -> GridSequence:
    values = np.zeros(horizon + 1)
    values[0] = 1.0
    return GridSequence(values, Decay.zero())


def _sum_delta(spec: KernelSpec, start: int) -> tuple[float, bool]:
    return (1.0 if start <= 0 else 0.0), True


def _seq_explicit(spec: KernelSpec, horizon: int) -> GridSequence:
    values = np.zeros(horizon + 1)
    n = min(len(spec.params), horizon + 1)
    values[:n] = spec.params[:n]
    decay = Decay.zero() if len(spec.params) <= horizon + 1 else \
        Decay.bounded(max(abs(p) for p in spec.params[horizon + 1:]))
    return GridSequence(values, decay)


def _sum_explicit(spec: KernelSpec, start: int) -> tuple[float, bool]:
    return float(sum(abs(p) for p in spec.params[max(start, 0):])), True


def _seq_fdiff(spec: KernelSpec, horizon: int) -> GridSequence:
    return fractional_difference_kernel(spec.params[0], horizon)


def _sum_fdiff(spec: KernelSpec, start: int) -> tuple[float, bool]:
    alpha = spec.params[0]
    horizon = max(start, 0) + 2000
    seq = fractional_difference_kernel(alpha, horizon)
    head = float(np.sum(np.abs(seq.values[max(start, 0):])))
    if alpha == math.ceil(alpha):
        return head, True
    return head + seq.decay.sum_from(1), False


register_kernel_kind("cesaro", _seq_cesaro, _sum_cesaro)
register_kernel_kind("geometric", _seq_geometric, _sum_geometric)
register_kernel_kind("delta", _seq_delta, _sum_delta)
register_kernel_kind("explicit", _seq_explicit, _sum_explicit)
register_kernel_kind("fdiff", _seq_fdiff, _sum_fdiff)


# }}}


# {{{ convolutions


def _product_rule(sa: tuple[int, ...], sb: tuple[int, ...]) -> str:
    if sa == () or sb == ():
        return "scalar"
    if len(sa) == 2 and len(sb) == 2 and sa[1] == sb[0]:
        return "matmat"
    if len(sa) == 2 and len(sb) == 1 and sa[1] == sb[0]:
        return "matvec"
    raise ShapeError(f"cannot multiply elements of shapes {sa} and {sb}")


def _cauchy(a: NDArray, b: NDArray, n: int) -> NDArray:
    """Cauchy product of stacked arrays on indices ``0..n-1``."""
    rule = _product_rule(a.shape[1:], b.shape[1:])
    if rule == "scalar":
        if a.ndim == 1:
            out_shape = b.shape[1:]
        else:
            out_shape = a.shape[1:]
    elif rule == "matmat":
        out_shape = (a.shape[1], b.shape[2])
    else:
        out_shape = (a.shape[1],)
    dtype = np.result_type(a, b)
    out = np.zeros((n,) + out_shape, dtype=dtype)
    for k in range(n):
        # j runs over lo..hi with a(k - j) and b(j) both stored
        lo = max(0, k - a.shape[0] + 1)
        hi = min(k, b.shape[0] - 1)
        if hi < lo:
            continue
        ar = a[k - np.arange(lo, hi + 1)]
        br = b[lo:hi + 1]
        if rule == "scalar":
            if a.ndim == 1 and b.ndim == 1:
                out[k] = np.dot(ar, br)
            elif a.ndim == 1:
                out[k] = np.tensordot(ar, br, axes=(0, 0))
            else:
                out[k] = np.tensordot(br, ar, axes=(0, 0))
        elif rule == "matmat":
            out[k] = np.einsum("jab,jbc->ac", ar, br)
        else:
            out[k] = np.einsum("jab,jb->a", ar, br)
    return out


def conv0(a: GridSequence, b: GridSequence, horizon: int | None = None) -> GridSequence:
    r"""One-sided Cauchy product :math:`(a \ast_0 b)(v) = \sum_{j=0}^{v} a(v-j) b(j)`.

    Element products may be scalar times anything, matrix times matrix or
    matrix times vector.  The result lives on ``0..horizon`` which defaults to
    the smaller of the two horizons.
    """
    if horizon is None:
        horizon = min(a.horizon, b.horizon)
    if horizon > a.horizon or horizon > b.horizon:
        raise HorizonError(f"horizon {horizon} exceeds the operands ({a.horizon}, {b.horizon})")
    return GridSequence(_cauchy(a.values[: horizon + 1], b.values[: horizon + 1], horizon + 1))


def _tail_bound(a_norms: NDArray, a_decay: Decay | None, b: BiSequence,
                v: int) -> float:
    """Bound on sum_{l < b.lo} ||a(v - l)|| ||b(l)|| for one output index."""
    bdec = b.decay
    if bdec is None:
        raise CertificationError(
            "the right operand has no decay declaration left of its window; "
            "a Weyl sum cannot be truncated with a certificate")
    if bdec.kind == "zero":
        return 0.0
    H = a_norms.shape[0] - 1
    offset = v - b.lo  # s = offset + d for distance d = b.lo - l
    total = 0.0
    if offset + 1 <= H:
        s = np.arange(offset + 1, H + 1)
        total += float(np.dot(a_norms[s], bdec.term(s - offset)))
    d0 = max(1, H - offset + 1)  # first distance where a is beyond its horizon
    e0 = offset + d0 - H
    if a_decay is not None and a_decay.kind == "zero":
        return total
    if a_decay is None:
        raise CertificationError(
            "the kernel has no decay declaration beyond its horizon and the "
            "window is wider than the stored kernel tail")
    s1 = a_decay.sup_from(e0) * bdec.sum_from(d0)
    s2 = bdec.sup_from(d0) * a_decay.sum_from(e0)
    part = min(s1 if math.isfinite(s1) else math.inf, s2 if math.isfinite(s2) else math.inf)
    if not math.isfinite(part):
        raise CertificationError(
            "neither the kernel nor the sequence tail is summable; no truncation bound")
    return total + part


def weyl_conv(a: GridSequence, b: BiSequence, lo: int | None = None,
              hi: int | None = None) -> BiSequence:
    r"""Weyl convolution :math:`(a \circ b)(v) = \sum_{l=-\infty}^{v} a(v-l) b(l)`.

    The stored part of the sum runs over ``b.lo <= l <= v``.  The remaining
    terms are bounded with the decay declaration of *b* (left of its window)
    and of *a* (beyond its horizon), giving a certified bound per output index
    that is returned in the ``tail`` field of the result.  Errors already
    carried by ``b.tail`` are propagated.  The output window defaults to the
    window of *b*; it cannot start left of ``b.lo``.
    """
    lo = b.lo if lo is None else int(lo)
    hi = b.hi if hi is None else int(hi)
    if lo < b.lo or hi > b.hi or hi < lo:
        raise HorizonError(f"output window [{lo}, {hi}] must lie inside [{b.lo}, {b.hi}]")
    width = hi - b.lo
    if width > a.horizon:
        raise HorizonError(f"kernel horizon {a.horizon} is shorter than the window width {width}")
    full = _cauchy(a.values[: width + 1], b.values[: width + 1], width + 1)
    values = full[lo - b.lo:]
    a_norms = a.norms()
    b_tail = b.tail
    tails = np.empty(hi - lo + 1)
    for i, v in enumerate(range(lo, hi + 1)):
        t = _tail_bound(a_norms, a.decay, b, v)
        n = v - b.lo
        if np.any(b_tail[: n + 1]):
            t += float(np.dot(a_norms[n::-1], b_tail[: n + 1]))
        tails[i] = t
    decay = None
    if lo == b.lo and b.decay is not None:
        if b.decay.kind == "zero":
            decay = Decay.zero()
        elif b.decay.kind == "geometric":
            rho = b.decay.rate
            weights = rho ** np.arange(a.horizon + 1, dtype=float)
            acc = float(np.dot(a_norms, weights))
            if a.decay is not None:
                acc += a.decay.sup_from(1) * rho ** (a.horizon + 1) / (1.0 - rho)
                decay = Decay.geometric(rho, b.decay.bound * acc)
    return BiSequence(values, lo, decay, tails)


def exp_weight(s: GridSequence | BiSequence, omega: float, shift: int = 0):
    r"""Multiply by :math:`e^{-\omega (v - \text{shift})}`.

    Decay declarations and carried truncation bounds are transformed along.
    """
    omega = float(omega)
    if isinstance(s, GridSequence):
        v = np.arange(s.horizon + 1, dtype=float)
        w = np.exp(-omega * (v - shift))
        values = s.values * w.reshape((-1,) + (1,) * len(s.elem_shape))
        decay = _weighted_decay(s.decay, math.exp(-omega), float(w[-1]))
        return GridSequence(values, decay)
    if isinstance(s, BiSequence):
        v = s.indices.astype(float)
        w = np.exp(-omega * (v - shift))
        values = s.values * w.reshape((-1,) + (1,) * len(s.elem_shape))
        # left of the window the weight grows by e^{omega} per step
        decay = _weighted_decay(s.decay, math.exp(omega), float(w[0]))
        return BiSequence(values, s.lo, decay, s.tail * w)
    raise TypeError(f"cannot weight {type(s).__name__}")


def _weighted_decay(decay: Decay | None, step: float, edge: float) -> Decay | None:
    # the weight at distance d from the edge is edge * step**d
    if decay is None:
        return None
    if decay.kind == "zero":
        return decay
    if decay.kind == "geometric":
        rate = decay.rate * step
        return Decay.geometric(rate, decay.bound * edge) if rate < 1 else None
    if decay.kind in ("bounded", "constant"):
        if step < 1:
            return Decay.geometric(step, decay.bound * edge)
        return Decay.bounded(decay.bound * edge) if step == 1 else None
    if decay.kind in ("algebraic", "summable"):
        if step <= 1:
            return decay.scaled(edge)
        return None
    return None


def continuous_g(alpha: float, t: float) -> float:
    r"""Continuous kernel :math:`g_{\alpha}(t) = t^{\alpha-1} / \Gamma(\alpha)`."""
    if alpha <= 0:
        raise DomainError(f"order must be positive: {alpha}")
    if t < 0 or (t == 0 and alpha < 1):
        raise DomainError(f"g_{alpha} is undefined at t = {t}")
    if t == 0:
        return 1.0 if alpha == 1 else 0.0
    return float(np.exp((alpha - 1.0) * math.log(t) - gammaln(alpha)))


# }}}
