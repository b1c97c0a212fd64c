r"""Solutions on :math:`\mathbb{Z}` and on :math:`\mathbb{N}_0` built from existence families.

Given an existence family ``S`` of a multi-term problem

.. math::

    B u(v) = \sum_i A_i \sum_{l \le v + v_i} a_i(v + v_i - l) u(l)
             + (k \circ C f)(v) + g(v),

the sequence :math:`u(v) = \sum_{l \le v} S(v - l) f(l)` solves it with the
correction term

.. math::

    g(v) = -\sum_i A_i \sum_{l=v+1}^{v+v_i} (a_i \ast_0 S)(v + v_i - l) f(l),

which vanishes when every lag is zero.  Every infinite sum is evaluated on a
finite window with a certified (or explicitly heuristic) bound on the
neglected part, and every verification reports that bound separately from
the residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (CertificationError, HorizonError, PreconditionError, ShapeError,
                     SummabilityRefusal)
from .fracdiff import forward_diff, weyl_frac_diff
from .linopspace import LinOp
from .resolvent import (VERIFY_TOL, ExistenceFamily, Kernel, ProblemSpec, Residuals,
                        _finish, _geometric_tail, kernel_values, summability_check)
from .seqkernel import (BiSequence, Decay, GridSequence, KernelSpec, _cauchy, element_norms,
                        exp_weight, weyl_conv)

__all__ = [
    "SolutionBundle",
    "TailInfo",
    "family_tail",
    "weyl_solution",
    "correction_g",
    "solve",
    "verify_bundle",
    "verify_nonscalar_solution",
    "verify_multiterm",
    "verify_weyl_multiterm",
    "verify_fractional_equation",
    "exp_weighted_solution",
    "weighted_spec",
    "shift_combination",
    "DacpResult",
    "dacp_solution",
    "APDecomposition",
    "ap_decomposition",
]


# {{{ containers


@dataclass(frozen=True)
class TailInfo:
    """How the part of the family beyond its horizon is accounted for.

    ``decay`` is attached to the family before any Weyl sum is formed;
    ``rigorous`` is false when it rests on a ratio fit of the last norms.
    """

    decay: Decay
    rigorous: bool
    source: str


@dataclass(frozen=True, eq=False)
class SolutionBundle:
    """A solution on a finite window together with its correction term and checks.

    ``u`` and ``g`` are in the original frame.  For a weighted solution
    ``omega`` is set and ``u_weighted``/``g_weighted`` hold
    :math:`e^{-\\omega v} u(v)` and the correction term of the weighted data,
    in which frame the residual is evaluated.
    """

    u: BiSequence
    g: BiSequence
    f: BiSequence
    spec: ProblemSpec
    residual_report: Mapping[str, Residuals]
    tail: TailInfo
    omega: float | None = None
    u_weighted: BiSequence | None = None
    g_weighted: BiSequence | None = None
    tail_certificates: Mapping[str, NDArray[np.float64]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.residual_report.values())

    @property
    def window(self) -> tuple[int, int]:
        return self.u.window


# }}}


# {{{ helpers


def _family_parts(family: ExistenceFamily | GridSequence,
                  spec: ProblemSpec | None) -> ExistenceFamily:
    if isinstance(family, ExistenceFamily):
        return family
    if isinstance(family, GridSequence):
        if spec is None:
            raise PreconditionError("a bare family sequence needs the problem spec")
        if family.elem_shape != (spec.dim, spec.dim):
            raise ShapeError(f"family elements must be {spec.dim}x{spec.dim}")
        fam = _finish(spec, family.values, 1.0, tol=None)
        return ExistenceFamily(spec, fam.S.with_decay(family.decay), fam.AiS, fam.conv,
                               fam.residuals, None, 1.0)
    raise TypeError(f"not a family: {type(family).__name__}")


def family_tail(family: ExistenceFamily, growth: tuple[float, float] | None = None) -> TailInfo:
    r"""Decay declaration for ``S`` beyond its horizon.

    In order of preference: a declared growth bound ``(M, q)`` meaning
    :math:`\|S(v)\| \le M q^v` (checked on the stored range), a decay already
    attached to ``S``, the rigorous tail bound of the summability criteria,
    and finally the geometric extrapolation of the last norms (heuristic).
    A family that does not look summable is refused.
    """
    S = family.S
    H = S.horizon
    norms = S.norms()
    if growth is not None:
        M, q = (float(x) for x in growth)
        envelope = M * q ** np.arange(H + 1, dtype=float)
        bad = np.nonzero(norms > envelope * (1 + 1e-9) + 1e-300)[0]
        if bad.size:
            raise CertificationError(
                f"declared growth bound {M:g} * {q:g}^v fails at v={int(bad[0])}")
        if q >= 1:
            raise SummabilityRefusal(
                f"declared growth rate {q:g} is not below one; weighting with "
                f"omega > {math.log(q):.6g} would make the family summable")
        return TailInfo(Decay.geometric(q, M * q**H), True, "declared growth bound")
    if S.decay is not None:
        if not S.decay.summable():
            raise SummabilityRefusal("the declared decay of the family is not summable")
        return TailInfo(S.decay, S.decay.kind != "algebraic", "declared decay")
    try:
        cert = family.certificate or summability_check(family.spec, family)
    except SummabilityRefusal:
        cert = None
    if cert is not None and cert.tail_rigorous:
        return TailInfo(Decay.tail_sum(cert.tail_bound), True,
                        f"summability criterion ({cert.criterion})")
    rate, estimate = _geometric_tail(norms)
    if not math.isfinite(estimate):
        raise SummabilityRefusal(
            f"no summability certificate and the norms grow with ratio {rate:.6g}; "
            f"weighting with omega > {math.log(rate):.6g} is the estimated minimum")
    return TailInfo(Decay.tail_sum(estimate), False, "ratio extrapolation (heuristic)")


def _kernel_grid(kernel: Kernel, horizon: int) -> GridSequence:
    if isinstance(kernel, KernelSpec):
        return kernel.sequence(horizon)
    if kernel.horizon >= horizon:
        return kernel
    vals = kernel_values(kernel, horizon)
    return GridSequence(vals, kernel.decay)


def _apply_matrix(M: NDArray, x: BiSequence) -> BiSequence:
    """``v -> M x(v)`` with decay and carried tail scaled by ``||M||``."""
    nM = float(np.linalg.norm(M, 2))
    vals = np.einsum("ab,vb...->va...", M, x.values)
    decay = x.decay.scaled(nM) if x.decay is not None else None
    return BiSequence(vals, x.lo, decay, x.tail * nM)


def _window_default(f: BiSequence, horizon: int,
                    window: tuple[int, int] | None) -> tuple[int, int]:
    if window is None:
        return f.lo, min(f.hi, f.lo + horizon)
    lo, hi = (int(w) for w in window)
    if lo < f.lo or hi > f.hi or hi < lo:
        raise HorizonError(f"window [{lo}, {hi}] must lie inside the forcing window "
                           f"[{f.lo}, {f.hi}]")
    if hi - f.lo > horizon:
        raise HorizonError(f"window reaches {hi - f.lo} steps past the start of the forcing "
                           f"but the family is stored to {horizon}")
    return lo, hi


# }}}


# {{{ construction


def weyl_solution(family: ExistenceFamily | GridSequence, f: BiSequence,
                  window: tuple[int, int] | None = None, *, spec: ProblemSpec | None = None,
                  growth: tuple[float, float] | None = None) -> BiSequence:
    r""":math:`u(v) = \sum_{l \le v} S(v - l) f(l)` on *window*.

    The neglected part of the sum (``l`` left of the forcing window, and
    ``S`` beyond its horizon) is bounded per index in ``tail``.  Families
    without a summability certificate are refused.
    """
    fam = _family_parts(family, spec)
    info = family_tail(fam, growth)
    S = fam.S.with_decay(info.decay)
    if f.elem_shape != (fam.dim,):
        raise ShapeError(f"forcing elements must be vectors of length {fam.dim}")
    lo, hi = _window_default(f, S.horizon, window)
    u = weyl_conv(S, f, lo, hi)
    if u.decay is None and lo == f.lo and f.decay is not None and \
            f.decay.kind in ("bounded", "constant"):
        # ||u(l)|| <= sum ||S|| * sup ||f|| left of the window
        total = float(np.sum(S.norms())) + info.decay.sum_from(1)
        fsup = max(f.decay.bound, float(np.max(f.norms())))
        u = u.with_decay(Decay.bounded(total * fsup))
    return u


def correction_g(spec: ProblemSpec, family: ExistenceFamily | GridSequence, f: BiSequence,
                 window: tuple[int, int] | None = None) -> BiSequence:
    r"""The correction term of the lagged problem on *window*.

    .. math::

        g(v) = -\sum_i A_i \sum_{l=v+1}^{v+v_i} (a_i \ast_0 S)(v + v_i - l) f(l).

    Only finitely many values of ``f`` enter, so ``g`` is exact up to the
    error already carried by ``f``.  The window defaults to the forcing
    window shortened by the maximal lag.
    """
    fam = _family_parts(family, spec)
    vm = spec.vmax
    lo, hi = (f.lo, f.hi - vm) if window is None else (int(window[0]), int(window[1]))
    if lo < f.lo or hi + vm > f.hi or hi < lo:
        raise HorizonError(f"correction window [{lo}, {hi}] needs f on [{lo + 1}, {hi + vm}], "
                           f"stored on [{f.lo}, {f.hi}]")
    n = hi - lo + 1
    d = spec.dim
    out = np.zeros((n, d), dtype=np.result_type(f.values, fam.S.values))
    tail = np.zeros(n)
    for i, (A, vi) in enumerate(zip(spec.As, spec.lags)):
        if vi == 0:
            continue
        if vi - 1 > fam.horizon:
            raise HorizonError(f"family horizon {fam.horizon} shorter than lag {vi}")
        Am = A.matrix
        conv = fam.conv[i].values[:vi]  # (a_i *_0 S)(0 .. v_i - 1)
        AC = np.einsum("ab,sbc->sac", Am, conv)
        ACn = element_norms(AC)
        for r, v in enumerate(range(lo, hi + 1)):
            # l = v + j, j = 1..v_i, kernel index v_i - j
            idx = np.arange(v + 1, v + vi + 1) - f.lo
            fl = f.values[idx]
            s = vi - np.arange(1, vi + 1)
            out[r] -= np.einsum("sab,sb->a", AC[s], fl)
            tail[r] += float(np.dot(ACn[s], f.tail[idx]))
    return BiSequence(out, lo, None, tail)


# }}}


# {{{ verification


def verify_multiterm(spec: ProblemSpec, u: BiSequence, f: BiSequence, g: BiSequence | None,
                     tol: float = VERIFY_TOL) -> Residuals:
    r"""Residual of the multi-term identity on the largest verifiable window.

    At every ``v`` the defect of

    .. math::

        B u(v) - \sum_i A_i (a_i \circ u)(v + v_i) - (k \circ C f)(v) - g(v)

    is reported, with the certified truncation bounds of all Weyl sums in the
    ``tail`` field of the result.  ``g = None`` means the zero sequence.
    """
    if not spec.autonomous:
        raise PreconditionError("identities on the integers need an autonomous B")
    vm = spec.vmax
    lo = max(u.lo, f.lo, g.lo if g is not None else u.lo)
    hi = min(u.hi - vm, f.hi, g.hi if g is not None else u.hi)
    if hi < lo:
        raise HorizonError("the solution, forcing and correction share no verifiable window")
    n = hi - lo + 1
    Bm = spec.B.matrix
    uu = u.restrict(lo, hi)
    Bu = np.einsum("ab,vb->va", Bm, uu.values)
    defect = Bu.copy()
    tail = float(np.linalg.norm(Bm, 2)) * uu.tail
    scale = element_norms(Bu)
    kseq = _kernel_grid(spec.k, len(f))
    Cf = _apply_matrix(spec.C.matrix, f)
    kCf = weyl_conv(kseq, Cf).restrict(lo, hi)
    defect -= kCf.values
    tail = tail + kCf.tail
    scale = np.maximum(scale, element_norms(kCf.values))
    for A, a, vi in zip(spec.As, spec.kernels, spec.lags):
        w = weyl_conv(_kernel_grid(a, len(u)), u).restrict(lo + vi, hi + vi)
        term = np.einsum("ab,vb->va", A.matrix, w.values)
        defect -= term
        tail = tail + A.norm() * w.tail
        scale = np.maximum(scale, element_norms(term))
    if g is not None:
        gg = g.restrict(lo, hi)
        defect -= gg.values
        tail = tail + gg.tail
        scale = np.maximum(scale, gg.norms())
    return Residuals(element_norms(defect), scale, tol, start=lo, tail=tail)


def verify_nonscalar_solution(Bseq: LinOp | ArrayLike | Callable[[int], ArrayLike],
                              A: GridSequence, k: Kernel, C: LinOp | ArrayLike,
                              f: BiSequence, u: BiSequence,
                              tol: float = VERIFY_TOL) -> Residuals:
    r"""Residual of :math:`B(v) u(v) = (k \circ C f)(v) + \sum_{l \le v} A(v-l) u(l)`.

    ``A`` is the operator-valued kernel, ``Bseq`` a fixed operator or a
    callable ``v -> B(v)``.
    """
    Cm = C.matrix if isinstance(C, LinOp) else np.asarray(C)
    lo, hi = max(u.lo, f.lo), min(u.hi, f.hi)
    if hi < lo:
        raise HorizonError("solution and forcing share no window")
    if callable(Bseq) and not isinstance(Bseq, LinOp):
        Bv = np.stack([np.asarray(Bseq(v)) for v in range(lo, hi + 1)])
    else:
        Bm = Bseq.matrix if isinstance(Bseq, LinOp) else np.asarray(Bseq)
        Bv = np.broadcast_to(Bm, (hi - lo + 1,) + Bm.shape)
    uu = u.restrict(lo, hi)
    Bu = np.einsum("vab,vb->va", Bv, uu.values)
    kCf = weyl_conv(_kernel_grid(k, len(f)), _apply_matrix(Cm, f)).restrict(lo, hi)
    if A.horizon < len(u) - 1 and A.decay is not None and A.decay.kind == "zero":
        pad = np.zeros((len(u),) + A.elem_shape, dtype=A.values.dtype)
        pad[: A.horizon + 1] = A.values
        A = GridSequence(pad, Decay.zero())
    Au = weyl_conv(A, u).restrict(lo, hi)
    defect = Bu - kCf.values - Au.values
    tail = element_norms(Bv) * uu.tail + kCf.tail + Au.tail
    scale = np.maximum.reduce([element_norms(Bu), element_norms(kCf.values),
                               element_norms(Au.values)])
    return Residuals(element_norms(defect), scale, tol, start=lo, tail=tail)


def verify_weyl_multiterm(spec: ProblemSpec, alphas: Sequence[float], u: BiSequence,
                          f: BiSequence, g: BiSequence | None,
                          tol: float = VERIFY_TOL) -> Residuals:
    r"""Residual of the fractional form of the multi-term identity.

    For kernels :math:`a_i = k^{m - \alpha_i}` (one common ``m``) the
    identity differenced ``m`` times reads

    .. math::

        \Delta^m (B u)(v) = \sum_i A_i (\Delta^{\alpha_i}_W u)(v + v_i)
            + \Delta^m (k \circ C f)(v) + \Delta^m g(v),

    and every piece is evaluated with the fractional difference operators.
    """
    alphas = [float(a) for a in alphas]
    if len(alphas) != spec.n:
        raise ShapeError(f"need one order per term, got {len(alphas)} for {spec.n} terms")
    ms = {math.ceil(a) for a in alphas}
    if len(ms) != 1:
        raise PreconditionError("all orders must share m = ceil(alpha)")
    m = ms.pop()
    if m < 1:
        raise PreconditionError("orders must be positive")
    if not spec.autonomous:
        raise PreconditionError("identities on the integers need an autonomous B")
    Bm = spec.B.matrix
    Bu = forward_diff(_apply_matrix(Bm, u).with_decay(None), m)
    kCf = forward_diff(weyl_conv(_kernel_grid(spec.k, len(f)),
                                 _apply_matrix(spec.C.matrix, f)).with_decay(None), m)
    pieces = []
    for A, alpha, vi in zip(spec.As, alphas, spec.lags):
        w = weyl_frac_diff(u, alpha).shift(vi)
        pieces.append((A.matrix, w))
    gd = forward_diff(g.with_decay(None), m) if g is not None else None
    lo = max(Bu.lo, kCf.lo, *(w.lo for _, w in pieces), gd.lo if gd is not None else Bu.lo)
    hi = min(Bu.hi, kCf.hi, *(w.hi for _, w in pieces), gd.hi if gd is not None else Bu.hi)
    if hi < lo:
        raise HorizonError("the differenced pieces share no window")
    Bw = Bu.restrict(lo, hi)
    kw = kCf.restrict(lo, hi)
    defect = Bw.values - kw.values
    tail = Bw.tail + kw.tail
    scale = np.maximum(Bw.norms(), kw.norms())
    for Am, w in pieces:
        ww = w.restrict(lo, hi)
        term = np.einsum("ab,vb->va", Am, ww.values)
        defect = defect - term
        tail = tail + float(np.linalg.norm(Am, 2)) * ww.tail
        scale = np.maximum(scale, element_norms(term))
    if gd is not None:
        gw = gd.restrict(lo, hi)
        defect = defect - gw.values
        tail = tail + gw.tail
        scale = np.maximum(scale, gw.norms())
    return Residuals(element_norms(defect), scale, tol, start=lo, tail=tail)


def verify_fractional_equation(terms: Sequence[tuple[ArrayLike, float, int]], u: BiSequence,
                               rhs: BiSequence, omega: float = 0.0,
                               tol: float = VERIFY_TOL) -> Residuals:
    r"""Residual of :math:`e^{-\omega v} \sum_j A_j (\Delta^{\alpha_j}_W u)(v + h_j) = r(v)`.

    Each term is ``(A_j, alpha_j, h_j)``; order ``0`` means ``u`` itself.
    The weight keeps the check on the scale of the weighted data when ``u``
    grows.
    """
    pieces = []
    for A, alpha, h in terms:
        Am = np.atleast_2d(np.asarray(A, dtype=float))
        if Am.shape == (1, 1) and u.elem_shape[0] != 1:
            Am = Am[0, 0] * np.eye(u.elem_shape[0])
        w = u if alpha == 0 else weyl_frac_diff(u, alpha)
        pieces.append((Am, w.shift(int(h))))
    lo = max(rhs.lo, *(w.lo for _, w in pieces))
    hi = min(rhs.hi, *(w.hi for _, w in pieces))
    if hi < lo:
        raise HorizonError("the terms share no window")
    weight = np.exp(-omega * np.arange(lo, hi + 1, dtype=float))
    r = rhs.restrict(lo, hi)
    defect = -r.values.astype(float)
    tail = r.tail.copy()
    scale = r.norms()
    for Am, w in pieces:
        ww = w.restrict(lo, hi)
        term = weight[:, None] * np.einsum("ab,vb->va", Am, ww.values)
        defect = defect + term
        tail = tail + weight * float(np.linalg.norm(Am, 2)) * ww.tail
        scale = np.maximum(scale, element_norms(term))
    return Residuals(element_norms(defect), scale, tol, start=lo, tail=tail)


# }}}


# {{{ bundles


def solve(family: ExistenceFamily | GridSequence, f: BiSequence,
          window: tuple[int, int] | None = None, *, spec: ProblemSpec | None = None,
          growth: tuple[float, float] | None = None,
          tol: float = VERIFY_TOL) -> SolutionBundle:
    """Solution, correction term and residual report for the unweighted problem."""
    fam = _family_parts(family, spec)
    spec = fam.spec
    info = family_tail(fam, growth)
    u = weyl_solution(fam, f, window, growth=growth)
    g = correction_g(spec, fam, f, (u.lo, min(u.hi, f.hi - spec.vmax)))
    res = verify_multiterm(spec, u, f, g, tol)
    return SolutionBundle(u, g, f, spec, {"multiterm": res}, info,
                          tail_certificates={"u": u.tail, "residual": res.tail})


def verify_bundle(bundle: SolutionBundle, tol: float | None = None) -> dict[str, Residuals]:
    """Recompute the residual report of a bundle from its stored data."""
    tol = next(iter(bundle.residual_report.values())).tol if tol is None else tol
    if bundle.omega is None:
        return {"multiterm": verify_multiterm(bundle.spec, bundle.u, bundle.f, bundle.g, tol)}
    wspec = weighted_spec(bundle.spec, bundle.omega)
    fw = exp_weight(bundle.f, bundle.omega)
    return {"weighted multiterm": verify_multiterm(wspec, bundle.u_weighted, fw,
                                                   bundle.g_weighted, tol)}


def _weighted_kernel(a: Kernel, omega: float, shift: int) -> Kernel:
    if isinstance(a, KernelSpec):
        return a.weighted(omega, shift)
    return exp_weight(a, omega, shift)


def weighted_spec(spec: ProblemSpec, omega: float) -> ProblemSpec:
    r"""Problem data with :math:`a_i(v) \mapsto e^{-\omega (v - v_i)} a_i(v)` and
    :math:`k(v) \mapsto e^{-\omega v} k(v)`."""
    kernels = tuple(_weighted_kernel(a, omega, vi) for a, vi in zip(spec.kernels, spec.lags))
    return ProblemSpec(spec.B, spec.C, spec.As, kernels, spec.lags,
                       _weighted_kernel(spec.k, omega, 0), spec.complement)


def exp_weighted_solution(spec: ProblemSpec, family: ExistenceFamily | GridSequence,
                          f: BiSequence, omega: float,
                          window: tuple[int, int] | None = None, *,
                          growth: tuple[float, float] | None = None,
                          tol: float = VERIFY_TOL) -> SolutionBundle:
    r"""Solution for a family that is summable only after exponential weighting.

    With :math:`S_\omega(v) = e^{-\omega v} S(v)` and
    :math:`f_\omega(l) = e^{-\omega l} f(l)` the solution is
    :math:`u(v) = e^{\omega v} (S_\omega \circ f_\omega)(v)`.  ``S_\omega`` is
    an existence family for the weighted kernels, so the correction term
    ``g_omega`` and the residual check reuse the unweighted machinery on the
    weighted data.  ``growth = (M, q)`` declares :math:`\|S(v)\| \le M q^v`.
    """
    omega = float(omega)
    if omega < 0:
        raise PreconditionError(f"omega must be nonnegative: {omega}")
    fam = _family_parts(family, spec)
    if omega == 0:
        return solve(fam, f, window, growth=growth, tol=tol)
    wspec = weighted_spec(spec, omega)
    Sw = exp_weight(fam.S.with_decay(None), omega)
    wfam = _family_parts(Sw, wspec)
    wgrowth = None if growth is None else (growth[0], growth[1] * math.exp(-omega))
    try:
        info = family_tail(wfam, wgrowth)
    except SummabilityRefusal as exc:
        rate, _ = _geometric_tail(fam.S.norms())
        q = growth[1] if growth is not None else rate
        need = math.log(q) if q > 0 else -math.inf
        raise SummabilityRefusal(
            f"the family weighted with omega={omega:g} is not summable; the estimated "
            f"minimal weight is omega > {need:.6g}") from exc
    fw = exp_weight(f, omega)
    if fw.decay is None and f.decay is not None:
        raise CertificationError(
            f"the forcing does not decay fast enough to the left for omega={omega:g}")
    uw = weyl_solution(wfam, fw, window, growth=wgrowth)
    gw = correction_g(wspec, wfam, fw, (uw.lo, min(uw.hi, fw.hi - spec.vmax)))
    res = verify_multiterm(wspec, uw, fw, gw, tol)
    u = exp_weight(uw, -omega)
    g = exp_weight(gw, -omega)
    return SolutionBundle(u, g, f, spec, {"weighted multiterm": res}, info, omega, uw, gw,
                          {"u_weighted": uw.tail, "residual": res.tail})


def shift_combination(spec: ProblemSpec, u: BiSequence, f: BiSequence,
                      coeffs: Sequence[float], shifts: Sequence[int],
                      tol: float = VERIFY_TOL) -> tuple[BiSequence, Residuals]:
    r"""``y(v) = sum_j c_j u(v + h_j)`` and the residual of the equation it solves.

    Without lags ``y`` solves the same problem with forcing
    :math:`\sum_j c_j f(\cdot + h_j)`, that is
    :math:`B y = \sum_i A_i (a_i \circ y) + \sum_j c_j (k \circ C f)(\cdot + h_j)`.
    """
    if spec.vmax != 0:
        raise PreconditionError("shift combinations solve the shifted problem only without lags")
    if len(coeffs) != len(shifts) or not coeffs:
        raise ShapeError("need matching, nonempty coefficient and shift lists")

    y = _shift_sum(u, coeffs, shifts)
    fy = _shift_sum(f, coeffs, shifts)
    return y, verify_multiterm(spec, y, fy, None, tol)


def _shift_sum(x: BiSequence, coeffs: Sequence[float], shifts: Sequence[int]) -> BiSequence:
    """``sum_j c_j x(. + h_j)`` on the common window, with a decay declaration."""
    shifts = [int(h) for h in shifts]
    span = max(shifts) - min(shifts)
    if x.decay is not None and x.decay.kind == "zero" and span:
        # pad with exact zeros so the combination keeps the full window
        pad = np.zeros((span,) + x.elem_shape, dtype=x.values.dtype)
        x = BiSequence(np.concatenate([pad, x.values]), x.lo - span, Decay.zero(),
                       np.concatenate([np.zeros(span), x.tail]))
    parts = [x.shift(h) for h in shifts]
    lo = max(p.lo for p in parts)
    hi = min(p.hi for p in parts)
    if hi < lo:
        raise HorizonError("shifts leave no common window")
    vals = sum(c * p.restrict(lo, hi).values for c, p in zip(coeffs, parts))
    tail = sum(abs(c) * p.restrict(lo, hi).tail for c, p in zip(coeffs, parts))
    csum = float(sum(abs(c) for c in coeffs))
    dec = x.decay
    decay = None
    if dec is not None:
        if dec.kind == "zero":
            decay = dec
        elif dec.kind in ("bounded", "constant", "summable"):
            head = float(np.max(x.norms()[: span + 1]))
            decay = Decay(dec.kind if dec.kind != "constant" else "bounded",
                          bound=csum * max(dec.bound, head))
            if dec.kind == "summable":
                decay = Decay.tail_sum(csum * (dec.bound + float(np.sum(x.norms()[: span + 1]))))
        elif dec.kind == "geometric" and dec.rate > 0:
            head = float(np.max(x.norms()[: span + 1]))
            decay = Decay.geometric(dec.rate, csum * max(dec.bound, head) * dec.rate ** (-span))
    return BiSequence(vals, lo, decay, tail)


# }}}


# {{{ problems on N_0


@dataclass(frozen=True, eq=False)
class DacpResult:
    """Solution ``u = (g *_0 S) x`` of a Cauchy problem on the nonnegative integers."""

    u: GridSequence
    forcing: GridSequence
    strong: Residuals
    mild: Residuals

    @property
    def classification(self) -> dict[str, bool]:
        return {"strong": self.strong.passed, "mild": self.mild.passed}


def dacp_solution(family: ExistenceFamily, g: Kernel, x: ArrayLike,
                  tol: float = VERIFY_TOL) -> DacpResult:
    r"""``u(v) = (g *_0 S)(v) x`` with ``f(v) = (k *_0 g)(v) C x``.

    The strong identity
    :math:`B u(v) = f(v) + \sum_i (a_i \ast_0 A_i u)(v + v_i)` applies each
    :math:`A_i` to ``u`` pointwise before convolving.  The mild identity
    :math:`B u(v) = f(v) + \sum_i A_i (a_i \ast_0 u)(v + v_i)` only needs the
    convolved sequence.  Both are checked for ``v <= horizon - vmax``.
    """
    spec = family.spec
    if not spec.autonomous:
        Bv = np.stack([spec.B_at(v) for v in range(family.horizon + 1)])
    else:
        Bv = np.broadcast_to(spec.B.matrix, (family.horizon + 1, spec.dim, spec.dim))
    H = family.horizon
    x = np.asarray(x)
    if x.shape != (spec.dim,):
        raise ShapeError(f"x must be a vector of length {spec.dim}")
    gv = kernel_values(g, H)
    Sx = np.einsum("vab,b->va", family.S.values, x)
    u = _cauchy(gv, Sx, H + 1)
    kg = _cauchy(kernel_values(spec.k, H), gv, H + 1)
    f = np.multiply.outer(kg, spec.C.matrix @ x)
    V = H - spec.vmax
    if V < 0:
        raise HorizonError(f"family horizon {H} shorter than the maximal lag")
    Bu = np.einsum("vab,vb->va", Bv[: V + 1], u[: V + 1])
    strong = Bu - f[: V + 1]
    mild = strong.copy()
    scale = np.maximum(element_norms(Bu), element_norms(f[: V + 1]))
    for A, a, vi in zip(spec.As, spec.kernels, spec.lags):
        av = kernel_values(a, H)
        Au = np.einsum("ab,vb->va", A.matrix, u)
        s_term = _cauchy(av, Au, H + 1)[vi: vi + V + 1]
        m_term = np.einsum("ab,vb->va", A.matrix, _cauchy(av, u, H + 1)[vi: vi + V + 1])
        strong -= s_term
        mild -= m_term
        scale = np.maximum(scale, element_norms(s_term))
    return DacpResult(GridSequence(u), GridSequence(f),
                      Residuals(element_norms(strong), scale, tol),
                      Residuals(element_norms(mild), scale, tol))


@dataclass(frozen=True, eq=False)
class APDecomposition:
    """``u = H + Q`` on ``0..V`` with ``H`` periodic and ``Q`` vanishing.

    ``periodicity_defect`` is the largest ``||H(v+p) - H(v)||`` and
    ``certificate`` the bound it must respect (the truncation of the sum
    defining ``H`` plus rounding).  ``Q`` is fitted by ``C rho^v``;
    ``sup_Q`` is the largest ``||Q(v)||`` for ``v >= V0``.
    """

    u: GridSequence
    H: GridSequence
    Q: GridSequence
    period: int
    periodicity_defect: float
    certificate: float
    consistency: float
    rate: float
    constant: float
    sup_Q: float
    V0: int
    tail: TailInfo

    @property
    def passed(self) -> bool:
        return (self.periodicity_defect <= self.certificate
                and self.rate < 1.0 and self.consistency <= 1e-10 * max(1.0, self.scale))

    @property
    def scale(self) -> float:
        return float(max(np.max(self.u.norms()), np.max(self.H.norms())))


def ap_decomposition(family: ExistenceFamily, h: ArrayLike, x: ArrayLike,
                     horizon: int, q: Kernel | None = None, V0: int | None = None,
                     growth: tuple[float, float] | None = None) -> APDecomposition:
    r"""Split the solution driven by ``h + q`` into a periodic and a vanishing part.

    ``h`` holds one period of a scalar periodic forcing, extended to all
    integers; ``q`` is a scalar sequence vanishing at infinity (default
    zero).  With ``u(v) = sum_{l=0}^{v} S(v-l)(h+q)(l) x`` on ``0..horizon``:

    * :math:`H(v) = \sum_{s \ge 0} S(s) h(v-s) x`, summed over the stored
      family; it is exactly periodic up to rounding;
    * :math:`Q(v) = \sum_{l=0}^{v} S(v-l) q(l) x - \sum_{s > v} S(s) h(v-s) x`,
      evaluated directly rather than as ``u - H`` so that its decay is not
      hidden by cancellation.
    """
    info = family_tail(family, growth)
    h = np.asarray(h, dtype=float).ravel()
    p = h.size
    if p < 1:
        raise ShapeError("need at least one value of the periodic part")
    x = np.asarray(x)
    Hs = family.horizon
    V = int(horizon)
    if V > Hs:
        raise HorizonError(f"decomposition horizon {V} exceeds the family horizon {Hs}")
    Sx = np.einsum("vab,b->va", family.S.values, x)
    qv = np.zeros(V + 1) if q is None else kernel_values(q, V)
    hv = h[np.arange(V + 1) % p]
    u = _cauchy(hv + qv, Sx[: V + 1], V + 1)
    s = np.arange(Hs + 1)
    Hv = np.empty((V + p + 1, x.shape[0]), dtype=np.result_type(Sx, float))
    Qv = np.empty((V + 1, x.shape[0]), dtype=Hv.dtype)
    qS = _cauchy(qv, Sx[: V + 1], V + 1)
    for v in range(V + p + 1):
        weights = h[(v - s) % p]
        Hv[v] = weights @ Sx
        if v <= V:
            Qv[v] = qS[v] - weights[v + 1:] @ Sx[v + 1:]
    defect = float(np.max(element_norms(Hv[p:] - Hv[:-p])))
    hmax = float(np.max(np.abs(h)))
    xn = float(np.linalg.norm(x))
    eps = np.finfo(float).eps
    # the exact sum is periodic; the stored one differs from it by the family
    # tail beyond the horizon, and each evaluation carries rounding
    tail = hmax * info.decay.sum_from(1) * xn
    rounding = 4.0 * eps * (Hs + 1) * hmax * float(np.sum(element_norms(Sx)))
    certificate = 2.0 * tail + rounding
    consistency = float(np.max(element_norms(u - Hv[: V + 1] - Qv)))
    qn = element_norms(Qv)
    V0 = V // 4 if V0 is None else int(V0)
    good = np.nonzero(qn > 1e-280)[0]
    good = good[good >= min(V0, good.max() if good.size else 0)] if good.size else good
    if good.size >= 2:
        slope, _ = np.polyfit(good.astype(float), np.log(qn[good]), 1)
        rate = float(math.exp(slope))
    else:
        rate = 0.0
    constant = float(np.max(qn * rate ** (-np.arange(V + 1.0)))) if rate > 0 else float(qn[0])
    sup_Q = float(np.max(qn[V0:])) if V0 <= V else 0.0
    return APDecomposition(GridSequence(u), GridSequence(Hv[: V + 1]), GridSequence(Qv), p,
                           defect, certificate, consistency, rate, constant, sup_Q, V0, info)


# }}}
