"""Dense finite-dimensional operators: pencils, inverses and commutators.

At desk scale every closed operator of the continuous theory becomes a square
matrix with full domain.  Inclusions such as ``S A ⊆ A S`` collapse to matrix
commutation, which is measured by :func:`commutator_defect`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .errors import ShapeError, SingularityError

__all__ = [
    "LinOp",
    "PencilInverse",
    "RANK_TOL",
    "numerical_rank",
    "pencil_inverse",
    "commutator_defect",
    "injectivity_check",
]

#: Relative singular-value threshold below which a direction counts as null.
RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LinOp:
    """A dense ``dim x dim`` matrix with an optional label."""

    matrix: NDArray
    label: str = ""

    def __post_init__(self) -> None:
        m = np.array(self.matrix)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"operator {self.label!r} must be square, got shape {m.shape}")
        if not np.iscomplexobj(m):
            m = m.astype(float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, dim: int, label: str = "I") -> LinOp:
        return cls(np.eye(dim), label)

    @classmethod
    def zeros(cls, dim: int, label: str = "0") -> LinOp:
        return cls(np.zeros((dim, dim)), label)

    @classmethod
    def scalar(cls, value: complex, dim: int = 1, label: str = "") -> LinOp:
        return cls(value * np.eye(dim), label)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        """Spectral norm."""
        return float(np.linalg.norm(self.matrix, 2))

    def __matmul__(self, other):
        if isinstance(other, LinOp):
            return LinOp(self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    def __add__(self, other: LinOp) -> LinOp:
        return LinOp(self.matrix + other.matrix)

    def __sub__(self, other: LinOp) -> LinOp:
        return LinOp(self.matrix - other.matrix)

    def __mul__(self, c: complex) -> LinOp:
        return LinOp(c * self.matrix, self.label)

    __rmul__ = __mul__


def _as_matrix(op: LinOp | ArrayLike) -> NDArray:
    return op.matrix if isinstance(op, LinOp) else LinOp(np.asarray(op)).matrix


def numerical_rank(matrix: ArrayLike, tol: float = RANK_TOL) -> int:
    """Number of singular values above ``tol`` times the largest one."""
    s = np.linalg.svd(np.atleast_2d(np.asarray(matrix)), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


@dataclass(frozen=True, eq=False)
class PencilInverse:
    """Inverse of ``B - sum_i a_i(0) A_i`` together with its conditioning.

    ``condition`` is the spectral condition number of the pencil.
    """

    base: LinOp
    condition: float
    pencil: LinOp
    ingredients: tuple = field(default=())

    def apply(self, x: ArrayLike) -> NDArray:
        return self.base.matrix @ np.asarray(x)

    def identity_defect(self) -> float:
        """``||P (B - sum a_i(0) A_i) - I||`` in the spectral norm."""
        d = self.base.dim
        return float(np.linalg.norm(self.base.matrix @ self.pencil.matrix - np.eye(d), 2))


def pencil_inverse(B: LinOp | ArrayLike, As: Sequence[LinOp | ArrayLike],
                   a0s: Sequence[complex], tol: float = RANK_TOL) -> PencilInverse:
    """Invert the pencil ``B - sum_i a0s[i] * As[i]``.

    The numerical rank is read off the singular values; a pencil whose
    smallest-to-largest singular value ratio does not exceed *tol* raises
    :class:`~voldisc.errors.SingularityError` naming the rank.  Otherwise the
    inverse is formed from a partially pivoted LU factorization, which is
    deterministic for a given input.
    """
    Bm = _as_matrix(B)
    if len(As) != len(a0s):
        raise ShapeError(f"{len(As)} operators but {len(a0s)} leading kernel values")
    pencil = Bm.astype(np.result_type(Bm, *[np.asarray(a) for a in a0s], float))
    for A, a0 in zip(As, a0s):
        Am = _as_matrix(A)
        if Am.shape != Bm.shape:
            raise ShapeError(f"operator shape {Am.shape} differs from {Bm.shape}")
        pencil = pencil - a0 * Am
    s = np.linalg.svd(pencil, compute_uv=False)
    d = pencil.shape[0]
    if s[0] == 0 or s[-1] <= tol * s[0]:
        raise SingularityError("the pencil B - sum a_i(0) A_i is singular",
                               numerical_rank(pencil, tol), d)
    lu = scipy.linalg.lu_factor(pencil)
    inv = scipy.linalg.lu_solve(lu, np.eye(d, dtype=pencil.dtype))
    return PencilInverse(LinOp(inv), float(s[0] / s[-1]), LinOp(pencil),
                         (B, tuple(As), tuple(a0s)))


def commutator_defect(P: LinOp | ArrayLike, Q: LinOp | ArrayLike) -> float:
    """Frobenius norm of ``PQ - QP``."""
    Pm, Qm = _as_matrix(P), _as_matrix(Q)
    if Pm.shape != Qm.shape:
        raise ShapeError(f"shapes {Pm.shape} and {Qm.shape} differ")
    return float(np.linalg.norm(Pm @ Qm - Qm @ Pm, "fro"))


def injectivity_check(Ms: Sequence[LinOp | ArrayLike], tol: float = RANK_TOL) -> list[bool]:
    """Per matrix, whether its smallest singular value exceeds ``tol`` times the largest."""
    out = []
    for M in Ms:
        s = np.linalg.svd(_as_matrix(M), compute_uv=False)
        out.append(bool(s[0] > 0 and s[-1] > tol * s[0]))
    return out
