r"""Discrete fractional calculus on :math:`\mathbb{N}_0` and on :math:`\mathbb{Z}`.

With :math:`m = \lceil \alpha \rceil` the Riemann–Liouville difference on
:math:`\mathbb{N}_0` and the Weyl difference on :math:`\mathbb{Z}` are

.. math::

    \Delta^{\alpha} u = \Delta^{m} \bigl(k^{m-\alpha} \ast_0 u\bigr), \qquad
    \Delta^{\alpha}_W u = \Delta^{m} \bigl(k^{m-\alpha} \circ u\bigr).

Weyl sums run to :math:`-\infty`; they are evaluated with the truncation
certificates of :func:`~voldisc.seqkernel.weyl_conv`.  A sequence that is
constant left of its window is split into that constant (which every Weyl
difference of positive order annihilates) and a compactly supported rest, so
the divergent sum over the constant is never formed.

Forward differences of a two-sided sequence lose ``m`` indices on the right.
When the sequence is known exactly left of its window (zero or constant
continuation) the result is extended ``m`` indices to the left instead of
guessing a decay bound there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, HorizonError, ShapeError
from .seqkernel import (BiSequence, Decay, GridSequence, cesaro_sequence, conv0,
                        element_norms, weyl_conv)

__all__ = [
    "FracOrder",
    "forward_diff",
    "frac_sum",
    "rl_frac_diff",
    "weyl_frac_sum",
    "weyl_frac_diff",
    "weyl_commutation_defect",
    "CommutationDefect",
    "antidifference",
    "split_constant",
]


@dataclass(frozen=True)
class FracOrder:
    """A positive order ``alpha`` with ``m = ceil(alpha)``."""

    alpha: float

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"fractional order must be positive: {self.alpha}")

    @property
    def m(self) -> int:
        return math.ceil(self.alpha)

    @property
    def complement(self) -> float:
        """``m - alpha``, the order of the inner fractional sum."""
        return self.m - self.alpha

    @property
    def integer(self) -> bool:
        return self.alpha == self.m


def _order(alpha: float | FracOrder) -> FracOrder:
    return alpha if isinstance(alpha, FracOrder) else FracOrder(float(alpha))


def _binomial_weights(m: int) -> NDArray[np.float64]:
    return np.array([(-1) ** (m - j) * math.comb(m, j) for j in range(m + 1)], dtype=float)


def _diff_values(values: NDArray, m: int) -> NDArray:
    w = _binomial_weights(m)
    n = values.shape[0] - m
    out = np.zeros((n,) + values.shape[1:], dtype=np.result_type(values, float))
    for j, c in enumerate(w):
        out += c * values[j:j + n]
    return out


def forward_diff(u: GridSequence | BiSequence, m: int) -> GridSequence | BiSequence:
    r""":math:`\Delta^m u(v) = \sum_{j=0}^{m} (-1)^{m-j} \binom{m}{j} u(v+j)`.

    The result loses ``m`` indices on the right.  For a two-sided sequence with
    a zero or constant continuation it gains them back on the left, where the
    values are exact; other decay declarations are propagated with the
    binomial weights.
    """
    if m < 0:
        raise DomainError(f"difference order must be nonnegative: {m}")
    if m == 0:
        return u
    if isinstance(u, GridSequence):
        if u.horizon < m:
            raise HorizonError(f"horizon {u.horizon} too short for a difference of order {m}")
        return GridSequence(_diff_values(u.values, m))
    if not isinstance(u, BiSequence):
        raise TypeError(f"cannot difference {type(u).__name__}")
    if len(u) <= m:
        raise HorizonError(f"window of {len(u)} indices too short for order {m}")
    w = _binomial_weights(m)
    dec = u.decay
    if dec is not None and dec.kind in ("zero", "constant"):
        edge = u.values[0] if dec.kind == "constant" else np.zeros_like(u.values[0])
        ext = np.concatenate([np.repeat(edge[None], m, axis=0), u.values])
        ext_tail = np.concatenate([np.zeros(m), u.tail])
        values = _diff_values(ext, m)
        tail = np.convolve(ext_tail, np.abs(w[::-1]), "valid")
        return BiSequence(values, u.lo - m, Decay.zero(), tail)
    values = _diff_values(u.values, m)
    tail = np.convolve(u.tail, np.abs(w[::-1]), "valid")
    decay = None
    if dec is not None:
        nmax = float(np.max(element_norms(u.values[:m])))
        base = (2.0**m) * max(dec.bound, nmax)
        if dec.kind == "geometric":
            decay = Decay.geometric(dec.rate, base * dec.rate ** (-m)) if dec.rate > 0 else \
                Decay.bounded(base)
        elif dec.kind == "algebraic":
            decay = Decay.algebraic(dec.rate, base * ((dec.offset + m) / dec.offset) ** dec.rate,
                                    dec.offset)
        elif dec.kind == "bounded":
            decay = Decay.bounded(base)
    return BiSequence(values, u.lo, decay, tail)


def frac_sum(u: GridSequence, alpha: float) -> GridSequence:
    r"""Fractional sum :math:`\Delta^{-\alpha} u(v) = \sum_{j=0}^{v} k^{\alpha}(v-j) u(j)`."""
    if alpha < 0:
        raise DomainError(f"fractional sum order must be nonnegative: {alpha}")
    if alpha == 0:
        return u
    return conv0(cesaro_sequence(alpha, u.horizon), u)


def rl_frac_diff(u: GridSequence, alpha: float | FracOrder) -> GridSequence:
    r"""Riemann–Liouville difference :math:`\Delta^m (k^{m-\alpha} \ast_0 u)` on ``0..V-m``."""
    order = _order(alpha)
    if u.horizon < order.m:
        raise HorizonError(f"horizon {u.horizon} too short for order {order.alpha}")
    return forward_diff(frac_sum(u, order.complement), order.m)


def split_constant(u: BiSequence) -> tuple[NDArray | None, BiSequence]:
    """Split off a constant left continuation.

    Returns ``(c, w)`` with ``u = c + w`` and ``w`` vanishing left of the
    window; ``c`` is ``None`` when *u* is not declared constant on the left.
    """
    if u.decay is None or u.decay.kind != "constant":
        return None, u
    c = np.array(u.values[0])
    return c, BiSequence(u.values - c, u.lo, Decay.zero(), u.tail)


def weyl_frac_sum(u: BiSequence, beta: float) -> BiSequence:
    r"""Weyl fractional sum :math:`(k^{\beta} \circ u)(v)` on the window of *u*.

    Refused (certification error) when the left tail of *u* does not give a
    finite truncation bound.
    """
    if beta < 0:
        raise DomainError(f"fractional sum order must be nonnegative: {beta}")
    if beta == 0:
        return u
    kernel = cesaro_sequence(beta, len(u) - 1)
    return weyl_conv(kernel, u)


def weyl_frac_diff(u: BiSequence, alpha: float | FracOrder) -> BiSequence:
    r"""Weyl fractional difference :math:`\Delta^{\alpha}_W u = \Delta^m (k^{m-\alpha} \circ u)`.

    The ``tail`` field of the result bounds the truncation error per index.
    Constant left continuations are removed exactly first.
    """
    order = _order(alpha)
    _, w = split_constant(u)
    if order.integer:
        return forward_diff(w, order.m)
    return forward_diff(weyl_frac_sum(w, order.complement), order.m)


class CommutationDefect(NamedTuple):
    """Largest difference of the two evaluation orders and the certified slack."""

    defect: float
    certificate: float
    lo: int
    hi: int

    @property
    def passed(self) -> bool:
        return self.defect <= self.certificate + 1e-12


def weyl_commutation_defect(u: BiSequence, alpha: float | FracOrder) -> CommutationDefect:
    r"""Compare :math:`\Delta^m(\Delta_W^{-(m-\alpha)} u)` with :math:`\Delta_W^{-(m-\alpha)}(\Delta^m u)`.

    Both orders are evaluated on the common window and their difference is
    measured against the sum of their truncation certificates.
    """
    order = _order(alpha)
    _, w = split_constant(u)
    first = forward_diff(weyl_frac_sum(w, order.complement), order.m)
    second = weyl_frac_sum(forward_diff(w, order.m), order.complement)
    lo = max(first.lo, second.lo)
    hi = min(first.hi, second.hi)
    if hi < lo:
        raise HorizonError("the two evaluation orders share no window")
    a = first.restrict(lo, hi)
    b = second.restrict(lo, hi)
    diff = element_norms(a.values - b.values)
    return CommutationDefect(float(np.max(diff)), float(np.max(a.tail + b.tail)), lo, hi)


def antidifference(u: GridSequence | BiSequence, m: int,
                   anchors: ArrayLike) -> GridSequence | BiSequence:
    r"""A sequence ``h`` with :math:`\Delta^m h = u`, pinned by its first ``m`` values.

    The anchors are ``h`` at the first ``m`` indices of the window; every
    further value follows from
    :math:`h(v+m) = u(v) - \sum_{j<m} (-1)^{m-j}\binom{m}{j} h(v+j)`.
    The result covers ``m`` more indices than *u* on the right.
    """
    if m < 0:
        raise DomainError(f"order must be nonnegative: {m}")
    anchors = np.asarray(anchors, dtype=np.result_type(u.values, float))
    if m == 0:
        return u
    if anchors.shape != (m,) + u.values.shape[1:]:
        raise ShapeError(f"need {m} anchors of shape {u.values.shape[1:]}, got {anchors.shape}")
    n = u.values.shape[0]
    if n < 1:
        raise HorizonError("window too short")
    w = _binomial_weights(m)
    h = np.zeros((n + m,) + u.values.shape[1:], dtype=anchors.dtype)
    h[:m] = anchors
    for v in range(n):
        acc = u.values[v].astype(anchors.dtype)
        for j in range(m):
            acc = acc - w[j] * h[v + j]
        h[v + m] = acc
    if isinstance(u, GridSequence):
        return GridSequence(h)
    return BiSequence(h, u.lo)
