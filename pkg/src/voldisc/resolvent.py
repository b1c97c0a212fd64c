r"""Discrete existence families and resolvent/uniqueness families.

An existence family for the data :math:`(B, C, \{A_i\}, \{a_i\}, \{v_i\}, k)`
is a sequence of matrices :math:`S(0), S(1), \dots` with

.. math::

    B S(v) = k(v) C + \sum_{i=1}^{n} A_i (a_i \ast_0 S)(v + v_i),
    \qquad v \in \mathbb{N}_0 .

When every lag :math:`v_i` vanishes the identity determines the family
uniquely through the pencil :math:`B - \sum_i a_i(0) A_i`.  With a positive
maximal lag the first :math:`v_{max} + 1` values (the seed) are free up to one
consistency equation, and the remaining values follow from the pencil
:math:`P_M = \sum_{i \in M} a_i(0) A_i` over the terms of maximal lag.

Residuals are reported both absolutely and relative to the magnitude of the
terms entering the identity (floored at one), because the families grow or
decay over many orders of magnitude along long horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (CertificationError, HorizonError, PreconditionError, SeedError,
                     ShapeError, SingularityError, SummabilityRefusal)
from .linopspace import (RANK_TOL, LinOp, commutator_defect, injectivity_check,
                         numerical_rank, pencil_inverse)
from .seqkernel import GridSequence, KernelSpec, _cauchy, element_norms

__all__ = [
    "Kernel",
    "ProblemSpec",
    "ExistenceFamily",
    "UniquenessFamily",
    "Residuals",
    "SummabilityCertificate",
    "kernel_values",
    "kernel_abs_tails",
    "matrix_kernel",
    "build_family",
    "build_family_shifted",
    "min_norm_seed",
    "seed_residual",
    "verify_existence",
    "verify_resolvent_eqs",
    "verify_uniqueness_family",
    "convolution_uniqueness_identity",
    "summability_check",
    "nonautonomous_uniqueness",
    "convolve_family",
]

Kernel = Union[KernelSpec, GridSequence]

#: Default tolerance for residuals checked during construction.
CONSTRUCTION_TOL = 1e-10
#: Default tolerance for independent verification.
VERIFY_TOL = 1e-8
# Relative slack allowed on bounds that are exact for positive scalar data
# and would otherwise fail on the last rounding bit.
_ROUNDING = 1.0 + 1e-9


# {{{ kernels


def kernel_values(kernel: Kernel, horizon: int) -> NDArray:
    """Values of a scalar kernel on ``0..horizon``.

    A stored :class:`GridSequence` shorter than *horizon* is padded with zeros
    when its decay declaration says it vanishes beyond; otherwise the request
    is refused.
    """
    if isinstance(kernel, KernelSpec):
        return kernel.sequence(horizon).values
    if isinstance(kernel, GridSequence):
        if kernel.elem_shape != ():
            raise ShapeError("scalar kernel expected")
        if kernel.horizon >= horizon:
            return kernel.values[: horizon + 1]
        if kernel.decay is not None and kernel.decay.kind == "zero":
            out = np.zeros(horizon + 1, dtype=kernel.values.dtype)
            out[: kernel.horizon + 1] = kernel.values
            return out
        raise HorizonError(f"kernel stored to {kernel.horizon}, requested {horizon}")
    raise TypeError(f"not a kernel: {type(kernel).__name__}")


def kernel_abs_tails(kernel: Kernel, horizon: int) -> tuple[NDArray[np.float64], bool]:
    """Array ``t`` with ``t[s] = sum_{u >= s} |a(u)|`` for ``s = 0..horizon``.

    The second value tells whether the numbers are rigorous bounds or rest on
    a heuristic decay fit.  Non-summable kernels give ``inf`` everywhere.
    """
    if isinstance(kernel, KernelSpec):
        beyond, rigorous = kernel.abs_sum(horizon + 1)
        vals = np.abs(kernel.sequence(horizon).values)
    else:
        vals = np.abs(kernel_values(kernel, min(horizon, kernel.horizon)))
        if kernel.horizon > horizon:
            beyond = float(np.sum(np.abs(kernel.values[horizon + 1:])))
            vals = vals[: horizon + 1]
        else:
            beyond = 0.0
            vals = np.concatenate([vals, np.zeros(horizon + 1 - vals.size)])
        decay = kernel.decay
        if decay is None:
            beyond, rigorous = math.inf, False
        else:
            beyond += decay.sum_from(max(1, horizon + 1 - kernel.horizon))
            rigorous = decay.kind != "algebraic"
    if not math.isfinite(beyond):
        return np.full(horizon + 1, math.inf), rigorous
    tails = np.cumsum(vals[::-1])[::-1] + beyond
    return tails, rigorous


# }}}


# {{{ problem data


def _as_linop(x, label: str = "") -> LinOp:
    return x if isinstance(x, LinOp) else LinOp(np.asarray(x), label)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Data of one discrete Volterra problem.

    ``B`` is a single operator or a list indexed by ``v`` (nonautonomous).
    ``kernels[i]``, ``As[i]`` and ``lags[i]`` describe the ``i``-th term.
    ``complement`` is the index set of terms whose operator is not assumed to
    commute with the family; it only affects which summability criterion is
    available.
    """

    B: LinOp | tuple[LinOp, ...]
    C: LinOp
    As: tuple[LinOp, ...]
    kernels: tuple[Kernel, ...]
    lags: tuple[int, ...]
    k: Kernel
    complement: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if isinstance(self.B, (list, tuple)):
            object.__setattr__(self, "B", tuple(_as_linop(b, "B") for b in self.B))
        else:
            object.__setattr__(self, "B", _as_linop(self.B, "B"))
        object.__setattr__(self, "C", _as_linop(self.C, "C"))
        object.__setattr__(self, "As", tuple(_as_linop(a, f"A{i + 1}") for i, a in enumerate(self.As)))
        object.__setattr__(self, "kernels", tuple(self.kernels))
        object.__setattr__(self, "lags", tuple(int(v) for v in self.lags))
        object.__setattr__(self, "complement", frozenset(self.complement))
        n = len(self.As)
        if n < 1 or len(self.kernels) != n or len(self.lags) != n:
            raise ShapeError(f"need n >= 1 terms with matching kernels and lags, got "
                             f"{n}, {len(self.kernels)}, {len(self.lags)}")
        if any(v < 0 for v in self.lags):
            raise PreconditionError("lags must be nonnegative")
        d = self.C.dim
        for op in (*self.B_list(), *self.As):
            if op.dim != d:
                raise ShapeError(f"operator {op.label!r} has dim {op.dim}, expected {d}")
        for i in (self.M if self.vmax > 0 else ()):
            if kernel_values(self.kernels[i], 0)[0] == 0:
                raise PreconditionError(
                    f"term {i + 1} has maximal lag but a vanishing leading kernel value; "
                    "every term of maximal lag needs a_i(0) != 0")

    @property
    def n(self) -> int:
        return len(self.As)

    @property
    def dim(self) -> int:
        return self.C.dim

    @property
    def vmax(self) -> int:
        return max(self.lags)

    @property
    def M(self) -> tuple[int, ...]:
        """Indices (0-based) of the terms with maximal lag."""
        vm = max(self.lags)
        return tuple(i for i, v in enumerate(self.lags) if v == vm)

    @property
    def autonomous(self) -> bool:
        return isinstance(self.B, LinOp)

    def B_list(self) -> tuple[LinOp, ...]:
        return (self.B,) if isinstance(self.B, LinOp) else self.B

    def B_at(self, v: int) -> NDArray:
        if isinstance(self.B, LinOp):
            return self.B.matrix
        if v >= len(self.B):
            raise HorizonError(f"B(v) given for v <= {len(self.B) - 1}, requested {v}")
        return self.B[v].matrix

    def leading_values(self) -> list[complex]:
        return [kernel_values(a, 0)[0] for a in self.kernels]

    def commuting(self, tol: float = 1e-12) -> bool:
        """Whether B, C and every A_i commute pairwise (exactly, up to *tol*)."""
        ops = [*self.B_list(), self.C, *self.As]
        scale = max(1.0, max(op.norm() for op in ops)) ** 2
        return all(commutator_defect(p, q) <= tol * scale
                   for i, p in enumerate(ops) for q in ops[i + 1:])


def matrix_kernel(spec: ProblemSpec, horizon: int) -> GridSequence:
    """The operator-valued kernel ``A(v) = sum_i a_i(v) A_i`` on ``0..horizon``."""
    out = sum(np.multiply.outer(kernel_values(a, horizon), A.matrix)
              for a, A in zip(spec.kernels, spec.As))
    return GridSequence(out)


# }}}


# {{{ residual reports


@dataclass(frozen=True, eq=False)
class Residuals:
    """Per-index residual of an identity.

    ``absolute[v]`` is the norm of the defect at index ``v`` and ``scale[v]``
    the size of the largest term in the identity there; the relative residual
    divides by ``max(1, scale)``.  ``tail`` optionally holds a certified bound
    on the truncation error of the infinite sums entering the identity; it is
    kept apart from the residual and added to the allowance when deciding
    ``passed``.
    """

    absolute: NDArray[np.float64]
    scale: NDArray[np.float64]
    tol: float
    start: int = 0
    tail: NDArray[np.float64] | None = None

    @property
    def relative(self) -> NDArray[np.float64]:
        return self.absolute / np.maximum(1.0, self.scale)

    @property
    def max_abs(self) -> float:
        return float(np.max(self.absolute)) if self.absolute.size else 0.0

    @property
    def max_rel(self) -> float:
        return float(np.max(self.relative)) if self.absolute.size else 0.0

    @property
    def worst_index(self) -> int:
        return self.start + int(np.argmax(self.relative)) if self.absolute.size else self.start

    @property
    def max_tail(self) -> float:
        return float(np.max(self.tail)) if self.tail is not None and self.tail.size else 0.0

    @property
    def passed(self) -> bool:
        if self.tail is None:
            return self.max_rel <= self.tol
        allowance = self.tol * np.maximum(1.0, self.scale) + self.tail
        return bool(np.all(self.absolute <= allowance))

    def __float__(self) -> float:
        return self.max_rel


# }}}


# {{{ families


@dataclass(frozen=True, eq=False)
class SummabilityCertificate:
    """Outcome of the summability criteria.

    ``criterion`` is ``"a"`` (norms of ``P^{-1} A_i``), ``"b"`` (norms of
    ``A_i P^{-1}``, commuting data only) or ``None`` when neither strict
    inequality holds.  ``margin`` is ``1 - lhs`` of the better criterion.
    ``tail_bound`` bounds ``sum_{v > V} ||S(v)||`` and is rigorous when
    ``tail_rigorous`` is true; ``tail_estimate`` is the geometric
    extrapolation from the ratio of consecutive norms over the last tenth of
    the horizon and is always a heuristic.
    """

    criterion: str | None
    margin: float
    lhs: float
    horizon: int
    partial_sum: float
    term_sums: tuple[float, ...]
    tail_bound: float
    tail_rigorous: bool
    tail_estimate: float
    rate_estimate: float

    @property
    def holds(self) -> bool:
        return self.criterion is not None


@dataclass(frozen=True, eq=False)
class ExistenceFamily:
    """A computed existence family on ``0..horizon``.

    ``conv[i]`` holds ``(a_i *_0 S)(v)`` and ``AiS[i]`` holds ``A_i S(v)``.
    ``residuals`` is the defining identity checked on every index where it can
    be evaluated.
    """

    spec: ProblemSpec
    S: GridSequence
    AiS: tuple[GridSequence, ...]
    conv: tuple[GridSequence, ...]
    residuals: Residuals | None = None
    certificate: SummabilityCertificate | None = None
    condition: float = 1.0

    @property
    def horizon(self) -> int:
        return self.S.horizon

    @property
    def dim(self) -> int:
        return self.spec.dim

    def norms(self) -> NDArray[np.float64]:
        return self.S.norms()

    def norm_sums(self) -> dict[str, float]:
        sums = {"S": float(np.sum(self.norms()))}
        for i, A in enumerate(self.spec.As):
            vi = self.spec.lags[i]
            vals = A.matrix @ self.conv[i].values[vi:] if vi else A.matrix @ self.conv[i].values
            sums[f"A{i + 1}(a{i + 1}*S)"] = float(np.sum(element_norms(vals)))
        return sums

    def with_certificate(self, cert: SummabilityCertificate) -> ExistenceFamily:
        return ExistenceFamily(self.spec, self.S, self.AiS, self.conv, self.residuals,
                               cert, self.condition)

    def truncate(self, horizon: int) -> ExistenceFamily:
        spec = self.spec
        S = self.S.truncate(horizon)
        return _finish(spec, S.values, self.condition, tol=None)


@dataclass(frozen=True, eq=False)
class UniquenessFamily:
    """A sequence of matrices ``W(0..V)`` meant to satisfy the uniqueness identity."""

    W: GridSequence


def _finish(spec: ProblemSpec, S: NDArray, condition: float,
            tol: float | None) -> ExistenceFamily:
    seq = GridSequence(S)
    H = seq.horizon
    AiS = tuple(GridSequence(np.einsum("ab,vbc->vac", A.matrix, S)) for A in spec.As)
    conv = tuple(GridSequence(_cauchy(kernel_values(a, H), S, H + 1)) for a in spec.kernels)
    fam = ExistenceFamily(spec, seq, AiS, conv, None, None, condition)
    if H - spec.vmax >= 0:
        res = verify_existence(spec, fam, tol if tol is not None else CONSTRUCTION_TOL)
        fam = ExistenceFamily(spec, seq, AiS, conv, res, None, condition)
        if tol is not None and not res.passed:
            raise CertificationError(
                f"constructed family violates its defining identity: relative residual "
                f"{res.max_rel:.3e} at v={res.worst_index} exceeds {tol:.1e}")
    return fam


def build_family(spec: ProblemSpec, horizon: int,
                 tol: float | None = CONSTRUCTION_TOL) -> ExistenceFamily:
    r"""Existence family on ``0..horizon`` for data without lags.

    ``S(0) = k(0) P^{-1} C`` and for ``v >= 1``

    .. math::

        S(v) = P^{-1}\Bigl[k(v) C + \sum_i A_i \sum_{j=0}^{v-1} a_i(v-j) S(j)\Bigr],

    with the pencil :math:`P = B - \sum_i a_i(0) A_i` (re-inverted at every
    ``v`` when ``B`` depends on ``v``).  The defining identity is checked on
    the whole horizon and a :class:`~voldisc.errors.CertificationError` is
    raised if its relative residual exceeds *tol* (``None`` skips the check).
    """
    if spec.vmax != 0:
        raise PreconditionError("build_family needs all lags zero; use build_family_shifted")
    kv = kernel_values(spec.k, horizon)
    if kv[0] == 0:
        raise PreconditionError("the kernel k must satisfy k(0) != 0")
    avals = [kernel_values(a, horizon) for a in spec.kernels]
    a0 = [a[0] for a in avals]
    Cm = spec.C.matrix
    dtype = np.result_type(Cm, kv, *avals, *[A.matrix for A in spec.As], *[b.matrix for b in spec.B_list()])
    d = spec.dim
    S = np.zeros((horizon + 1, d, d), dtype=dtype)
    inv = pencil_inverse(spec.B_list()[0], spec.As, a0)
    condition = inv.condition
    for v in range(horizon + 1):
        if not spec.autonomous:
            inv = pencil_inverse(LinOp(spec.B_at(v)), spec.As, a0)
            condition = max(condition, inv.condition)
        rhs = kv[v] * Cm
        if v:
            for A, a in zip(spec.As, avals):
                rhs = rhs + A.matrix @ np.tensordot(a[v:0:-1], S[:v], axes=(0, 0))
        S[v] = inv.base.matrix @ rhs
    return _finish(spec, S, condition, tol)


def _seed_blocks(spec: ProblemSpec) -> list[NDArray]:
    # coefficient of S(j), j = 0..vmax, in the identity at v = 0
    vm = spec.vmax
    d = spec.dim
    avals = [kernel_values(a, vm) for a in spec.kernels]
    blocks = []
    for j in range(vm + 1):
        B0 = spec.B_at(0)
        G = np.array(B0, dtype=np.result_type(B0, float)) if j == 0 else np.zeros((d, d))
        for A, a, vi in zip(spec.As, avals, spec.lags):
            if vi >= j:
                G = G - a[vi - j] * A.matrix
        blocks.append(G)
    return blocks


def seed_residual(spec: ProblemSpec, seed: ArrayLike) -> float:
    """Relative defect of the ``v = 0`` identity for the seed ``S(0..vmax)``."""
    seed = np.asarray(seed)
    blocks = _seed_blocks(spec)
    k0 = kernel_values(spec.k, 0)[0]
    lhs = sum(G @ s for G, s in zip(blocks, seed))
    rhs = k0 * spec.C.matrix
    scale = max(1.0, float(np.linalg.norm(rhs, 2)),
                max(float(np.linalg.norm(G, 2) * np.linalg.norm(s, 2)) for G, s in zip(blocks, seed)))
    return float(np.linalg.norm(lhs - rhs, 2)) / scale


def min_norm_seed(spec: ProblemSpec) -> NDArray:
    """Seed ``S(0..vmax)`` of least Frobenius norm satisfying the ``v = 0`` identity.

    The identity reads ``sum_j G_j S(j) = k(0) C`` with
    ``G_j = [j = 0] B - sum_{i: v_i >= j} a_i(v_i - j) A_i``; the stacked
    underdetermined system is solved by least squares.
    """
    blocks = _seed_blocks(spec)
    G = np.hstack(blocks)
    rhs = kernel_values(spec.k, 0)[0] * spec.C.matrix
    X, *_ = np.linalg.lstsq(G, rhs, rcond=None)
    d = spec.dim
    seed = X.reshape(spec.vmax + 1, d, d)
    res = seed_residual(spec, seed)
    if res > 1e-10:
        raise SeedError("the consistency equation for the seed has no solution", res)
    return seed


def build_family_shifted(spec: ProblemSpec, horizon: int, seed: ArrayLike | None = None,
                         tol: float | None = CONSTRUCTION_TOL,
                         seed_tol: float = 1e-10) -> ExistenceFamily:
    r"""Extend a seed ``S(0..vmax)`` to an existence family on ``0..horizon``.

    For ``v >= 1`` the identity at index ``v`` is solved for the only new
    value ``S(v + vmax)``:

    .. math::

        P_M S(v + v_{max}) = B S(v) - k(v) C
            - \sum_i A_i \sum_{j < v + v_{max}} a_i(v + v_i - j) S(j),
        \qquad P_M = \sum_{i \in M} a_i(0) A_i .

    Without *seed* the least-norm seed of :func:`min_norm_seed` is used.  A
    seed violating the ``v = 0`` identity raises
    :class:`~voldisc.errors.SeedError`.
    """
    vm = spec.vmax
    if vm == 0:
        raise PreconditionError("build_family_shifted needs a positive maximal lag")
    if horizon < vm:
        raise HorizonError(f"horizon {horizon} shorter than the seed length {vm + 1}")
    d = spec.dim
    seed = min_norm_seed(spec) if seed is None else np.asarray(seed)
    if seed.shape != (vm + 1, d, d):
        raise ShapeError(f"seed must have shape {(vm + 1, d, d)}, got {seed.shape}")
    res = seed_residual(spec, seed)
    if res > seed_tol:
        raise SeedError("the seed violates the consistency equation at v = 0", res)
    PM = sum(kernel_values(spec.kernels[i], 0)[0] * spec.As[i].matrix for i in spec.M)
    s = np.linalg.svd(PM, compute_uv=False)
    if s[0] == 0 or s[-1] <= RANK_TOL * s[0]:
        raise SingularityError("sum of a_i(0) A_i over the terms of maximal lag is singular",
                               numerical_rank(PM), d)
    PMinv = np.linalg.inv(PM)
    kv = kernel_values(spec.k, horizon)
    avals = [kernel_values(a, horizon) for a in spec.kernels]
    dtype = np.result_type(seed, PM, kv, *avals, spec.C.matrix)
    S = np.zeros((horizon + 1, d, d), dtype=dtype)
    S[: vm + 1] = seed
    for v in range(1, horizon - vm + 1):
        w = v + vm
        rhs = spec.B_at(v) @ S[v] - kv[v] * spec.C.matrix
        for A, a, vi in zip(spec.As, avals, spec.lags):
            top = v + vi  # largest j with a nonnegative kernel argument
            hi = min(top, w - 1)
            if hi >= 0:
                rhs = rhs - A.matrix @ np.tensordot(a[top - np.arange(hi + 1)], S[: hi + 1], axes=(0, 0))
        S[w] = PMinv @ rhs
    return _finish(spec, S, float(s[0] / s[-1]), tol)


def convolve_family(family: ExistenceFamily, g: Kernel,
                    tol: float | None = None) -> ExistenceFamily:
    """The family ``g *_0 S`` for the kernel ``k *_0 g``."""
    H = family.horizon
    gv = kernel_values(g, H)
    S = _cauchy(gv, family.S.values, H + 1)
    kg = _cauchy(kernel_values(family.spec.k, H), gv, H + 1)
    spec = family.spec
    new = ProblemSpec(spec.B, spec.C, spec.As, spec.kernels, spec.lags,
                      GridSequence(kg), spec.complement)
    return _finish(new, S, family.condition, tol)


# }}}


# {{{ verification


def _family_values(family: ExistenceFamily | GridSequence | ArrayLike) -> NDArray:
    if isinstance(family, ExistenceFamily):
        return family.S.values
    if isinstance(family, GridSequence):
        return family.values
    return np.asarray(family)


def verify_existence(spec: ProblemSpec, family: ExistenceFamily | GridSequence | ArrayLike,
                     tol: float = VERIFY_TOL, horizon: int | None = None) -> Residuals:
    """Residual of ``B S(v) = k(v) C + sum_i A_i (a_i *_0 S)(v + v_i)`` for ``v <= horizon``."""
    S = _family_values(family)
    H = S.shape[0] - 1
    V = H - spec.vmax if horizon is None else horizon
    if V < 0 or V + spec.vmax > H:
        raise HorizonError(f"family horizon {H} does not cover v <= {V} plus lag {spec.vmax}")
    kv = kernel_values(spec.k, V)
    if not np.any(kv):
        raise PreconditionError("the kernel k must not vanish identically")
    Cm = spec.C.matrix
    Snorm = element_norms(S)
    absolute = np.empty(V + 1)
    scale = np.empty(V + 1)
    avals = [kernel_values(a, H) for a in spec.kernels]
    Anorm = [A.norm() for A in spec.As]
    Cn = spec.C.norm()
    for v in range(V + 1):
        Bm = spec.B_at(v)
        lhs = Bm @ S[v]
        rhs = kv[v] * Cm
        sc = max(float(np.linalg.norm(Bm, 2)) * Snorm[v], abs(kv[v]) * Cn)
        for A, a, vi, An in zip(spec.As, avals, spec.lags, Anorm):
            top = v + vi
            conv = np.tensordot(a[top::-1], S[: top + 1], axes=(0, 0))
            rhs = rhs + A.matrix @ conv
            sc = max(sc, An * float(np.dot(np.abs(a[top::-1]), Snorm[: top + 1])))
        absolute[v] = float(np.linalg.norm(lhs - rhs, 2))
        scale[v] = sc
    return Residuals(absolute, scale, tol)


def _seq_matrices(x, horizon: int, d: int) -> NDArray:
    if isinstance(x, GridSequence):
        vals = x.values
    elif isinstance(x, KernelSpec):
        vals = x.sequence(horizon).values
    else:
        vals = np.asarray(x)
    vals = vals[: horizon + 1]
    if vals.shape[0] < horizon + 1:
        raise HorizonError(f"sequence stored to {vals.shape[0] - 1}, requested {horizon}")
    if vals.ndim == 1:
        vals = np.multiply.outer(vals, np.eye(d))
    return vals


def _B_values(Bseq, horizon: int, d: int) -> NDArray:
    if isinstance(Bseq, LinOp):
        return np.broadcast_to(Bseq.matrix, (horizon + 1, d, d))
    if isinstance(Bseq, (list, tuple)):
        mats = [_as_linop(b).matrix for b in Bseq]
        if len(mats) < horizon + 1:
            raise HorizonError(f"B(v) given for v <= {len(mats) - 1}, requested {horizon}")
        return np.stack(mats[: horizon + 1])
    m = np.asarray(Bseq)
    if m.ndim == 2:
        return np.broadcast_to(m, (horizon + 1, d, d))
    return m[: horizon + 1]


def verify_resolvent_eqs(Bseq, S, A, k, C, tol: float = VERIFY_TOL,
                         horizon: int | None = None) -> tuple[Residuals, Residuals]:
    """Residuals of the first and second resolvent equations.

    First: ``B(v) S(v) - k(v) C - (A *_0 S)(v)``; second:
    ``B(v) S(v) - k(v) C - (S *_0 A)(v)``.  ``A`` is the matrix-valued kernel
    and ``k`` a scalar kernel.
    """
    Sv = _family_values(S)
    d = Sv.shape[1]
    V = Sv.shape[0] - 1 if horizon is None else horizon
    Sv = Sv[: V + 1]
    Av = _seq_matrices(A, V, d)
    kv = kernel_values(k, V) if isinstance(k, (KernelSpec, GridSequence)) else np.asarray(k)[: V + 1]
    Cm = _as_linop(C).matrix
    Bv = _B_values(Bseq, V, d)
    base = np.einsum("vab,vbc->vac", Bv, Sv) - np.multiply.outer(kv, Cm)
    AS = _cauchy(Av, Sv, V + 1)
    SA = _cauchy(Sv, Av, V + 1)
    Snorm = element_norms(Sv)
    Anorm = element_norms(Av)
    sc = np.maximum(element_norms(Bv) * Snorm, np.abs(kv) * np.linalg.norm(Cm, 2))
    sc = np.maximum(sc, _cauchy(Anorm, Snorm, V + 1))
    first = Residuals(element_norms(base - AS), sc, tol)
    second = Residuals(element_norms(base - SA), sc, tol)
    return first, second


def verify_uniqueness_family(Bseq, W, A, k, C, tol: float = VERIFY_TOL,
                             horizon: int | None = None) -> Residuals:
    """Residual of ``W(v) B(v) = k(v) C + sum_{j <= v} W(v - j) A(j)``."""
    Wv = W.W.values if isinstance(W, UniquenessFamily) else _family_values(W)
    d = Wv.shape[1]
    V = Wv.shape[0] - 1 if horizon is None else horizon
    Wv = Wv[: V + 1]
    Av = _seq_matrices(A, V, d)
    kv = kernel_values(k, V) if isinstance(k, (KernelSpec, GridSequence)) else np.asarray(k)[: V + 1]
    Cm = _as_linop(C).matrix
    Bv = _B_values(Bseq, V, d)
    defect = np.einsum("vab,vbc->vac", Wv, Bv) - np.multiply.outer(kv, Cm) - _cauchy(Wv, Av, V + 1)
    Wn = element_norms(Wv)
    sc = np.maximum(element_norms(Bv) * Wn, np.abs(kv) * np.linalg.norm(Cm, 2))
    sc = np.maximum(sc, _cauchy(Wn, element_norms(Av), V + 1))
    return Residuals(element_norms(defect), sc, tol)


def convolution_uniqueness_identity(W, f, k, C, u, horizon: int | None = None) -> float:
    """Largest norm of ``(k C *_0 u)(v) - (W *_0 f)(v)`` over ``v <= horizon``.

    *f* and *u* are sequences of vectors (or matrices) on ``0..V``.
    """
    Wv = W.W.values if isinstance(W, UniquenessFamily) else _family_values(W)
    fv = f.values if isinstance(f, GridSequence) else np.asarray(f)
    uv = u.values if isinstance(u, GridSequence) else np.asarray(u)
    V = min(Wv.shape[0], fv.shape[0], uv.shape[0]) - 1 if horizon is None else horizon
    kv = kernel_values(k, V) if isinstance(k, (KernelSpec, GridSequence)) else np.asarray(k)[: V + 1]
    Cm = _as_linop(C).matrix
    Cu = np.einsum("ab,vb...->va...", Cm, uv[: V + 1])
    left = _cauchy(kv, Cu, V + 1)
    right = _cauchy(Wv[: V + 1], fv[: V + 1], V + 1)
    return float(np.max(element_norms(left - right)))


# }}}


# {{{ summability


def summability_check(spec: ProblemSpec, family: ExistenceFamily | None = None,
                      horizon: int | None = None) -> SummabilityCertificate:
    r"""Evaluate the summability criteria and bound the tail of ``sum ||S(v)||``.

    Without lags, criterion (a) is

    .. math::

        1 > \sum_i \sum_{v \ge 1} |a_i(v)| \, \|P^{-1} A_i\|,

    and criterion (b) uses :math:`\|A_i P^{-1}\|` and is available only when
    the data commute.  With a positive maximal lag the recursion solves for
    ``S(v + vmax)`` through :math:`P_M`, and the criterion becomes
    :math:`1 > \|P_M^{-1} B\| + \sum_{i \in M} \|P_M^{-1} A_i\| \sum_{v \ge 1}|a_i(v)|
    + \sum_{i \notin M} \|P_M^{-1} A_i\| \sum_{v \ge 0} |a_i(v)|`.

    If a family is given, its partial sums are reported with a tail bound for
    ``sum_{v > V} ||S(v)||``.  Kernels that are neither absolutely summable
    nor multiplied by a zero operator lead to
    :class:`~voldisc.errors.SummabilityRefusal`.
    """
    if family is not None:
        H = family.horizon if horizon is None else horizon
        if H > family.horizon:
            raise HorizonError(f"family stored to {family.horizon}, requested {H}")
    else:
        H = 0 if horizon is None else horizon
    a0 = spec.leading_values()
    vm = spec.vmax
    if vm == 0:
        inv = pencil_inverse(spec.B_list()[0], spec.As, a0).base.matrix
        lead = 0.0
        starts = [1] * spec.n
    else:
        PM = sum(a0[i] * spec.As[i].matrix for i in spec.M)
        if numerical_rank(PM) < spec.dim:
            raise SingularityError("sum of a_i(0) A_i over the terms of maximal lag is singular",
                                   numerical_rank(PM), spec.dim)
        inv = np.linalg.inv(PM)
        lead = float(np.linalg.norm(inv @ spec.B_at(0), 2))
        starts = [1 if i in spec.M else 0 for i in range(spec.n)]
    tails: list[NDArray] = []
    rigorous = True
    norms_a, norms_b = [], []
    for i, (A, a) in enumerate(zip(spec.As, spec.kernels)):
        Am = A.matrix
        na = float(np.linalg.norm(inv @ Am, 2))
        nb = float(np.linalg.norm(Am @ inv, 2))
        t, rig = kernel_abs_tails(a, max(H, 1) + 1)
        if not np.any(Am):
            t = np.zeros_like(t)
        elif not math.isfinite(t[starts[i]]):
            raise SummabilityRefusal(
                f"kernel of term {i + 1} is not absolutely summable, so no summability "
                "criterion can be evaluated")
        rigorous = rigorous and rig
        tails.append(t)
        norms_a.append(na)
        norms_b.append(nb)
    sums = [t[s] for t, s in zip(tails, starts)]
    lhs_a = lead + sum(s * n for s, n in zip(sums, norms_a))
    lhs_b = lead + sum(s * n for s, n in zip(sums, norms_b))
    criterion: str | None = None
    lhs = lhs_a
    if lhs_a < 1:
        criterion = "a"
    elif spec.commuting() and lhs_b < 1:
        criterion, lhs = "b", lhs_b
    margin = 1.0 - lhs

    partial = math.nan
    term_sums: tuple[float, ...] = ()
    tail_bound = math.inf
    tail_estimate = math.inf
    rate = math.nan
    if family is not None:
        norms = family.norms()[: H + 1]
        partial = float(np.sum(norms))
        term_sums = tuple(
            float(np.sum(element_norms(np.einsum("ab,vbc->vac", A.matrix,
                                                 family.conv[i].values[vi: H + 1]))))
            for i, (A, vi) in enumerate(zip(spec.As, spec.lags)))
        rate, tail_estimate = _geometric_tail(norms)
        if criterion is not None and vm == 0 and spec.autonomous:
            ktail, krig = kernel_abs_tails(spec.k, H + 1)
            if math.isfinite(ktail[H + 1]):
                norm_PC = float(np.linalg.norm(inv @ spec.C.matrix, 2))
                ops = norms_a if criterion == "a" else norms_b
                if criterion == "b":
                    norm_PC = float(np.linalg.norm(spec.C.matrix @ inv, 2))
                K = norm_PC * ktail[H + 1]
                for t, n_i in zip(tails, ops):
                    # sum_{j <= H} ||S(j)|| * sum_{v > H} |a_i(v - j)|
                    K += n_i * float(np.dot(norms, t[H + 1 - np.arange(H + 1)]))
                tail_bound = _ROUNDING * K / margin
                rigorous = rigorous and krig
        if not math.isfinite(tail_bound):
            rigorous = False
    return SummabilityCertificate(criterion, margin, lhs, H, partial, term_sums,
                                  tail_bound, rigorous and math.isfinite(tail_bound),
                                  tail_estimate, rate)


def _geometric_tail(norms: NDArray[np.float64]) -> tuple[float, float]:
    """Envelope decay rate over the last two tenths and the implied geometric tail.

    Consecutive ratios are useless for oscillating norms, so the rate compares
    the largest norm in the last block with the largest in the block before.
    The tail estimate ``max_last / (1 - rate)`` is a heuristic.
    """
    H = norms.size - 1
    L = max(H // 10, 1)
    if H < 2 * L or norms[-1] == 0 and not np.any(norms[H - L + 1:]):
        return 0.0, 0.0
    m1 = float(np.max(norms[H - 2 * L + 1: H - L + 1]))
    m2 = float(np.max(norms[H - L + 1:]))
    if m2 == 0:
        return 0.0, 0.0
    if m1 == 0:
        return math.inf, math.inf
    rho = (m2 / m1) ** (1.0 / L)
    if rho >= 1:
        return rho, math.inf
    return rho, _ROUNDING * m2 / (1.0 - rho)


def nonautonomous_uniqueness(Bs: Sequence[LinOp | ArrayLike], A0: LinOp | ArrayLike,
                             horizon: int | None = None) -> tuple[bool, list[int]]:
    """Check that ``B(v) - A(0)`` is injective for every ``v``.

    Returns the verdict and the list of failing indices.
    """
    A0m = _as_linop(A0).matrix
    mats = [_as_linop(b).matrix for b in Bs]
    if horizon is not None:
        mats = mats[: horizon + 1]
    ok = injectivity_check([B - A0m for B in mats])
    failing = [v for v, good in enumerate(ok) if not good]
    return not failing, failing


# }}}
