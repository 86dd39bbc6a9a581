"""Standard-form linear programs and primal-dual iterates.

A program is ``min c.x  s.t.  A x = b, x >= 0`` with full-row-rank A
(m rows, n >= m columns). The dual variables are (y, s) with
``A^T y + s = c, s >= 0``. Everything here is an immutable value; all
functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from . import errors

__all__ = [
    "LinearProgram",
    "Iterate",
    "PreprocessedProgram",
    "ResidualReport",
    "ValidationReport",
    "validate",
    "residuals",
    "in_neighborhood",
    "binary_length",
    "preprocess",
    "canonical_reformulate",
]

#: pivot / identity-block tolerance used by preprocessing
BASIS_TOL = 1e-10


def _as_vector(v, length: int, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim != 1 or a.shape[0] != length:
        raise errors.DimensionMismatch(
            f"{name} must be a vector of length {length}, got shape {a.shape}"
        )
    return a


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """Validated standard-form instance.

    Construction fails on non-finite entries, on m > n, and on rank(A) < m.
    ``empty_interior`` marks instances known to have no strictly feasible
    point (see :func:`canonical_reformulate`); it is informational only.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    empty_interior: bool = False

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "A", A)
        m, n = A.shape
        object.__setattr__(self, "b", _as_vector(self.b, m, "b"))
        object.__setattr__(self, "c", _as_vector(self.c, n, "c"))
        if not (np.isfinite(A).all() and np.isfinite(self.b).all()
                and np.isfinite(self.c).all()):
            raise errors.NonFinite("problem data contains NaN or Inf")
        if m > n:
            raise errors.DimensionOrder(f"m={m} exceeds n={n}")
        if np.linalg.matrix_rank(A) < m:
            raise errors.RankDeficient(f"rank(A) < m={m}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True, eq=False)
class Iterate:
    """Primal-dual point (x, y, s).

    ``mu`` is the duality measure x.s / n. Interior iterates have x > 0
    and s > 0 componentwise; the class itself also admits boundary points
    (e.g. optimal solutions), which simply fail :func:`in_neighborhood`.
    """

    x: np.ndarray
    y: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float))
        if self.x.shape != self.s.shape or self.x.ndim != 1 or self.y.ndim != 1:
            raise errors.DimensionMismatch("x and s must be vectors of equal length")

    @cached_property
    def mu(self) -> float:
        """Duality measure x.s / n."""
        return float(self.x @ self.s) / self.x.shape[0]

    @property
    def is_interior(self) -> bool:
        return bool((self.x > 0).all() and (self.s > 0).all())

    def scaling(self) -> np.ndarray:
        """Diagonal of D = S^{-1/2} X^{1/2} (requires interiority)."""
        if not self.is_interior:
            raise errors.SingularDiagonal("scaling undefined on the boundary")
        return np.sqrt(self.x / self.s)


@dataclass(frozen=True, eq=False)
class PreprocessedProgram:
    """A program together with a fixed basis and its derived products.

    ``basis`` lists m column indices whose submatrix is invertible;
    ``basis_inverse`` is that submatrix's inverse, ``A_hat = basis_inverse @ A``
    (identity on the basis columns) and ``b_hat = basis_inverse @ b``.
    """

    base: LinearProgram
    basis: tuple
    basis_inverse: np.ndarray
    A_hat: np.ndarray
    b_hat: np.ndarray


@dataclass(frozen=True)
class ValidationReport:
    m: int
    n: int
    rank: int
    smallest_singular_value: float
    ok: bool


@dataclass(frozen=True)
class ResidualReport:
    """Feasibility residuals of an iterate against a program.

    ``primal_inf`` = max-norm of A x - b, ``dual_inf`` = max-norm of
    A^T y + s - c, ``gap`` = x.s, ``mu`` = gap / n.
    """

    primal_inf: float
    dual_inf: float
    gap: float
    mu: float


def validate(lp: LinearProgram) -> ValidationReport:
    """Re-derive the construction-time checks of a program.

    Rank is measured by full singular value decomposition; a constructed
    ``LinearProgram`` always passes, but the report carries the numbers.
    """
    sv = np.linalg.svd(lp.A, compute_uv=False)
    rank = int(np.linalg.matrix_rank(lp.A))
    return ValidationReport(
        m=lp.m,
        n=lp.n,
        rank=rank,
        smallest_singular_value=float(sv[-1]) if sv.size else 0.0,
        ok=(rank == lp.m and lp.m <= lp.n),
    )


def residuals(lp: LinearProgram, it: Iterate) -> ResidualReport:
    """Exact feasibility residuals, duality gap and measure for an iterate."""
    if it.x.shape[0] != lp.n or it.y.shape[0] != lp.m:
        raise errors.DimensionMismatch("iterate does not match program dimensions")
    gap = float(it.x @ it.s)
    return ResidualReport(
        primal_inf=float(np.linalg.norm(lp.A @ it.x - lp.b, np.inf)),
        dual_inf=float(np.linalg.norm(lp.A.T @ it.y + it.s - lp.c, np.inf)),
        gap=gap,
        mu=gap / lp.n,
    )


def in_neighborhood(it: Iterate, theta: float) -> bool:
    """Membership in the 2-norm central-path neighborhood.

    True iff x > 0, s > 0 and ``||x*s - mu e||_2 <= theta * mu`` where
    ``*`` is the componentwise product. Feasibility with respect to a
    particular program is checked separately via :func:`residuals`.
    """
    if not 0.0 <= theta < 1.0:
        raise errors.InvalidParameters(f"theta must lie in [0, 1), got {theta}")
    if not it.is_interior:
        return False
    products = it.x * it.s
    mu = it.mu
    return bool(np.linalg.norm(products - mu) <= theta * mu)


def binary_length(lp: LinearProgram) -> int:
    """Bit-length measure of the instance data.

    ``L = m n + m + n + sum ceil(log2(|a_ij| + 1)) + sum ceil(log2(|c_i| + 1))
    + sum ceil(log2(|b_j| + 1))``. Intended for integer data; non-integer
    magnitudes are rounded to the nearest integer before the formula.
    """

    def bits(v: np.ndarray) -> int:
        mags = np.rint(np.abs(v))
        return int(np.ceil(np.log2(mags + 1.0)).sum())

    return lp.m * lp.n + lp.m + lp.n + bits(lp.A) + bits(lp.c) + bits(lp.b)


def _auto_basis(A: np.ndarray) -> list:
    """Column-pivoted elimination: first m pivot columns of a rank-revealing QR."""
    m = A.shape[0]
    _, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size < m or diag[m - 1] <= BASIS_TOL * max(diag[0], 1.0):
        raise errors.SingularBasis("no invertible m-column basis found")
    return sorted(int(j) for j in piv[:m])


def preprocess(lp: LinearProgram, basis=None) -> PreprocessedProgram:
    """Fix a basis and precompute its inverse products.

    With ``basis`` omitted, a basis is selected deterministically by
    column-pivoted elimination (pivot threshold ``1e-10``). This is a
    one-time O(m^2 n) step; the result is reused for every normal-equation
    modification built from the program.
    """
    if basis is None:
        basis = _auto_basis(lp.A)
    basis = [int(j) for j in basis]
    if len(basis) != lp.m or len(set(basis)) != lp.m:
        raise errors.SingularBasis(f"basis must hold {lp.m} distinct indices")
    if min(basis) < 0 or max(basis) >= lp.n:
        raise errors.SingularBasis("basis index out of range")
    A_B = lp.A[:, basis]
    sv = np.linalg.svd(A_B, compute_uv=False)
    if sv[-1] <= BASIS_TOL * max(sv[0], 1.0):
        raise errors.SingularBasis("supplied basis columns are linearly dependent")
    basis_inverse = np.linalg.inv(A_B)
    # one residual-correction pass on the products: pushes A_B @ A_hat - A
    # and A_B @ b_hat - b from the eps*kappa(A_B) level down to machine
    # level, which keeps the per-step feasibility drift of the
    # basis-corrected directions flat on ill-conditioned instances
    A_hat = basis_inverse @ lp.A
    b_hat = basis_inverse @ lp.b
    A_hat += basis_inverse @ (lp.A - A_B @ A_hat)
    b_hat += basis_inverse @ (lp.b - A_B @ b_hat)
    return PreprocessedProgram(
        base=lp,
        basis=tuple(basis),
        basis_inverse=basis_inverse,
        A_hat=A_hat,
        b_hat=b_hat,
    )


def canonical_reformulate(lp: LinearProgram) -> LinearProgram:
    """Doubled slack form whose basis submatrix is free.

    Returns the (2m) x (n + 2m) instance

        [ A  I  0 ] [x u u']^T = ( b, -b),   cost (c, 0, 0),
        [-A  0  I ]

    which needs no basis-inversion preprocessing (the slack columns are an
    identity) but has an empty strict interior: any feasible point forces
    u = u' = 0. The returned program carries ``empty_interior=True``.
    """
    m, n = lp.m, lp.n
    A2 = np.block([
        [lp.A, np.eye(m), np.zeros((m, m))],
        [-lp.A, np.zeros((m, m)), np.eye(m)],
    ])
    b2 = np.concatenate([lp.b, -lp.b])
    c2 = np.concatenate([lp.c, np.zeros(2 * m)])
    return LinearProgram(A2, b2, c2, empty_interior=True)
