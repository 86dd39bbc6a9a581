"""Newton-system formulations and direction recovery.

Six formulations of the centering step are assembled from one iterate:

======  ==============  =========  =================  ==========
kind    size            symmetric  positive definite  unknowns
======  ==============  =========  =================  ==========
FNS     2n + m          no         no                 (dy, dx, ds)
AS      n + m           yes        no                 (dy, dx)
NES     m               yes        yes                dy
OSS     n               no         no                 (dy, lambda)
MNES    m               yes        yes                z (basis-scaled)
PNES    m               yes        yes                z (basis-scaled)
======  ==============  =========  =================  ==========

MNES rescales the normal equations by the inverse of a fixed basis
submatrix chosen once during preprocessing; PNES rebuilds that scaling
every call from the maximum-weight basis of the current iterate, which
acts as a preconditioner. For both, an inexact solve with residual
``r_hat`` is repaired into an exactly primal-feasible direction by the
basis-supported correction ``v = (D_B r_hat, 0)``.
"""

from __future__ import annotations

import enum
import itertools
import weakref
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import errors
from .problem import Iterate, LinearProgram, PreprocessedProgram

__all__ = [
    "SystemKind",
    "AssembledSystem",
    "Direction",
    "DirectionReport",
    "assemble",
    "null_space_basis",
    "select_basis_mwb",
    "recover_direction_mnes",
    "recover_direction_nes_procA",
    "recover_direction_oss",
    "recover_direction_fns",
    "recover_direction_as",
    "proc_a_residual_bound",
    "verify_direction",
    "condition_number",
    "chi_bar",
]

MWB_TOL = 1e-10  # rank-acceptance threshold, relative to column norm


class SystemKind(enum.Enum):
    FNS = "fns"
    AS = "as"
    NES = "nes"
    MNES = "mnes"
    OSS = "oss"
    PNES = "pnes"

    @classmethod
    def parse(cls, name: str) -> "SystemKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise errors.InputError(f"unknown system kind {name!r}") from None


#: (symmetric, positive_definite) per formulation
SYSTEM_TRAITS = {
    SystemKind.FNS: (False, False),
    SystemKind.AS: (True, False),
    SystemKind.NES: (True, True),
    SystemKind.OSS: (False, False),
    SystemKind.MNES: (True, True),
    SystemKind.PNES: (True, True),
}


def system_size(kind: SystemKind, m: int, n: int) -> int:
    return {
        SystemKind.FNS: 2 * n + m,
        SystemKind.AS: n + m,
        SystemKind.NES: m,
        SystemKind.OSS: n,
        SystemKind.MNES: m,
        SystemKind.PNES: m,
    }[kind]


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """One Newton-system formulation: matrix, right-hand side, metadata.

    ``factor_E`` (basis-scaled kinds only) satisfies
    ``matrix = factor_E @ factor_E.T``; ``basis_used`` records the basis
    behind it. ``null_basis`` is the cached orthonormal null-space basis
    carried by OSS assemblies.
    """

    kind: SystemKind
    matrix: np.ndarray
    rhs: np.ndarray
    symmetric: bool
    positive_definite: bool
    mu: float
    beta: float
    factor_E: Optional[np.ndarray] = None
    basis_used: Optional[tuple] = None
    null_basis: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class Direction:
    """Primal-dual step plus the solver residual it absorbed.

    ``residual_hat`` is the injected linear-system residual (length m,
    zero for exact solves). ``correction_v`` restores primal feasibility;
    for basis-corrected directions it is supported on the basis positions
    only, for the pseudoinverse correction it is dense.
    """

    dx: np.ndarray
    dy: np.ndarray
    ds: np.ndarray
    residual_hat: np.ndarray
    correction_v: np.ndarray
    system: SystemKind


@dataclass(frozen=True)
class DirectionReport:
    primal_residual: float  # ||A dx||_inf
    dual_residual: float  # ||A^T dy + ds||_inf
    third_row_residual: float  # ||X ds + S dx - (beta mu e - x*s) + S v||_inf
    dx_dot_ds: float
    sv_inf: float  # ||S v||_inf
    sv_bound: float  # eta * mu
    sv_ok: bool
    rhat_inf: float
    rhat_two: float
    rhat_bound: float  # (eta / sqrt(1+theta)) * sqrt(mu)
    mu: float


_null_basis_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def null_space_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis V of the null space of A, shape n x (n - m)."""
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    _, _, vh = np.linalg.svd(A, full_matrices=True)
    return vh[m:].T.copy()


def _cached_null_basis(prep: PreprocessedProgram) -> np.ndarray:
    V = _null_basis_cache.get(prep)
    if V is None:
        V = null_space_basis(prep.base.A)
        _null_basis_cache[prep] = V
    return V


def select_basis_mwb(it: Iterate, A: np.ndarray) -> list:
    """Maximum-weight basis: greedy over columns sorted by x_i / s_i.

    Columns are visited in decreasing ratio order (ties broken by lower
    index) and accepted iff they increase the rank of the selection,
    measured by the orthogonal remainder exceeding ``1e-10`` of the
    column norm. Returns exactly m indices in acceptance order.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if not it.is_interior:
        raise errors.SingularDiagonal("basis selection needs a strictly interior iterate")
    ratios = it.x / it.s
    order = np.lexsort((np.arange(n), -ratios))
    Q = np.empty((m, 0))
    chosen: list = []
    for j in order:
        col = A[:, j]
        norm = np.linalg.norm(col)
        if norm == 0.0:
            continue
        # two Gram-Schmidt passes keep the remainder trustworthy
        resid = col - Q @ (Q.T @ col)
        resid = resid - Q @ (Q.T @ resid)
        if np.linalg.norm(resid) > MWB_TOL * norm:
            Q = np.hstack([Q, (resid / np.linalg.norm(resid))[:, None]])
            chosen.append(int(j))
            if len(chosen) == m:
                return chosen
    raise errors.BasisNotFound(f"only {len(chosen)} independent columns found, need {m}")


def _basis_products(it: Iterate, prep: PreprocessedProgram, beta: float, basis):
    """Shared assembly of the basis-scaled normal equations.

    Returns (E, matrix, sigma_hat, d, d_B, basis_inverse, basis) where
    ``matrix = E E^T`` and ``sigma_hat`` is the scaled right-hand side.
    """
    lp = prep.base
    d = it.scaling()
    if basis is None or tuple(basis) == prep.basis:
        basis = prep.basis
        basis_inverse = prep.basis_inverse
        A_hat = prep.A_hat
        b_hat = prep.b_hat
    else:
        basis = tuple(int(j) for j in basis)
        A_B = lp.A[:, list(basis)]
        try:
            basis_inverse = np.linalg.inv(A_B)
        except np.linalg.LinAlgError as exc:
            raise errors.SingularBasis(str(exc)) from exc
        # same residual-correction pass as the fixed preprocessing
        A_hat = basis_inverse @ lp.A
        b_hat = basis_inverse @ lp.b
        A_hat += basis_inverse @ (lp.A - A_B @ A_hat)
        b_hat += basis_inverse @ (lp.b - A_B @ b_hat)
    d_B = d[list(basis)]
    E = (A_hat * d[None, :]) / d_B[:, None]
    matrix = E @ E.T
    matrix = 0.5 * (matrix + matrix.T)
    # the b_hat form (rather than A_hat @ x) makes the recovered step
    # correct any accumulated float-level primal infeasibility, pinning
    # ||A x - b|| at its per-step generation level over long runs
    sigma_hat = (b_hat - beta * it.mu * (A_hat @ (1.0 / it.s))) / d_B
    return E, matrix, sigma_hat, d, d_B, basis_inverse, basis


def assemble(kind: SystemKind, it: Iterate, prep: PreprocessedProgram,
             beta: float) -> AssembledSystem:
    """Build the requested formulation at the given iterate.

    The matrix and right-hand side follow the defining equations
    literally. MNES uses the fixed preprocessing basis; PNES reselects
    the maximum-weight basis on every call. OSS assemblies carry the
    (cached) null-space basis. Raises
    :class:`~ifipm.errors.SingularDiagonal` on boundary iterates.
    """
    lp = prep.base
    if not it.is_interior:
        raise errors.SingularDiagonal("assembly needs x > 0 and s > 0")
    x, s = it.x, it.s
    mu = it.mu
    m, n = lp.m, lp.n
    A = lp.A
    symmetric, positive_definite = SYSTEM_TRAITS[kind]
    factor_E = None
    basis_used = None
    null_basis = None

    if kind is SystemKind.FNS:
        matrix = np.block([
            [np.zeros((m, m)), A, np.zeros((m, n))],
            [A.T, np.zeros((n, n)), np.eye(n)],
            [np.zeros((n, m)), np.diag(s), np.diag(x)],
        ])
        rhs = np.concatenate([np.zeros(m + n), beta * mu - x * s])
    elif kind is SystemKind.AS:
        d2 = x / s
        matrix = np.block([
            [np.zeros((m, m)), A],
            [A.T, -np.diag(1.0 / d2)],
        ])
        matrix = 0.5 * (matrix + matrix.T)
        rhs = np.concatenate([np.zeros(m), s - beta * mu / x])
    elif kind is SystemKind.NES:
        d2 = x / s
        matrix = (A * d2[None, :]) @ A.T
        matrix = 0.5 * (matrix + matrix.T)
        rhs = A @ x - beta * mu * (A @ (1.0 / s))
    elif kind is SystemKind.OSS:
        V = _cached_null_basis(prep)
        matrix = np.hstack([-(x[:, None] * A.T), s[:, None] * V])
        rhs = beta * mu - x * s
        null_basis = V
    elif kind in (SystemKind.MNES, SystemKind.PNES):
        basis = None if kind is SystemKind.MNES else select_basis_mwb(it, A)
        E, matrix, rhs, _, _, _, basis_used = _basis_products(it, prep, beta, basis)
        factor_E = E
    else:  # pragma: no cover
        raise errors.InputError(f"unhandled system kind {kind}")

    if symmetric and not np.allclose(matrix, matrix.T, rtol=1e-10, atol=1e-12):
        raise errors.SolveError(f"{kind.name} assembly lost symmetry")
    return AssembledSystem(
        kind=kind,
        matrix=matrix,
        rhs=rhs,
        symmetric=symmetric,
        positive_definite=positive_definite,
        mu=mu,
        beta=beta,
        factor_E=factor_E,
        basis_used=basis_used,
        null_basis=null_basis,
    )


def recover_direction_mnes(z_tilde: np.ndarray, r_hat: np.ndarray, it: Iterate,
                           prep: PreprocessedProgram, beta: float,
                           basis=None) -> Direction:
    """Direction from a (possibly inexact) basis-scaled normal solve.

    ``r_hat`` must equal ``M_hat z_tilde - sigma_hat``; it is recomputed
    and cross-checked to 1e-8. The recovery is

        dy = (basis_inverse)^T (z_tilde / d_B)
        v  = (d_B * r_hat) on the basis positions, 0 elsewhere
        ds = -A^T dy
        dx = beta mu / s - x - (x/s) ds - v

    which leaves ``A dx = 0`` exactly and perturbs only the centering row
    by ``-S v``. (On dual-feasible iterates ``-A^T dy`` equals the
    infeasibility-restoring form ``c - A^T y - s - A^T dy``; the plain
    form is used because the restoring variant feeds machine-level dual
    noise through the ``x/s`` scaling, which grows unbounded near the
    optimal face.) Passing ``basis`` recovers against a per-iteration
    basis (the preconditioned variant); the default is the preprocessing
    basis.
    """
    lp = prep.base
    _, matrix, sigma_hat, _, d_B, basis_inverse, basis = _basis_products(
        it, prep, beta, basis)
    r_hat = np.asarray(r_hat, dtype=float)
    r_check = matrix @ np.asarray(z_tilde, dtype=float) - sigma_hat
    if np.linalg.norm(r_check - r_hat, np.inf) > 1e-8 * (1.0 + np.linalg.norm(r_hat, np.inf)):
        raise errors.ResidualMismatch(
            "supplied residual disagrees with recomputation by "
            f"{np.linalg.norm(r_check - r_hat, np.inf):.3e}")
    dy = basis_inverse.T @ (np.asarray(z_tilde, dtype=float) / d_B)
    v = np.zeros(lp.n)
    v[list(basis)] = d_B * r_hat
    ds = -lp.A.T @ dy
    dx = beta * it.mu / it.s - it.x - (it.x / it.s) * ds - v
    kind = SystemKind.MNES if tuple(basis) == prep.basis else SystemKind.PNES
    return Direction(dx=dx, dy=dy, ds=ds, residual_hat=r_hat, correction_v=v,
                     system=kind)


def proc_a_residual_bound(it: Iterate, lp: LinearProgram, eta: float) -> float:
    """Admissible normal-equation residual for the pseudoinverse correction.

    ``eta * mu / (||s||_inf * sigma_max(A))`` — the level below which the
    dense correction keeps ``||S v||_inf <= eta * mu``. Often impractically
    small, which is what motivates the basis-supported correction.
    """
    sigma_max = float(np.linalg.norm(lp.A, 2))
    return eta * it.mu / (float(np.linalg.norm(it.s, np.inf)) * sigma_max)


def recover_direction_nes_procA(dy_inexact: np.ndarray, r: np.ndarray, it: Iterate,
                                lp: LinearProgram, beta: float) -> Direction:
    """Direction from an inexact plain normal-equation solve.

    The primal drift ``A dx = r`` is repaired with the dense minimum-norm
    correction ``v = A^T (A A^T)^{-1} r``.
    """
    from .solvers import solve_exact

    r = np.asarray(r, dtype=float)
    gram = lp.A @ lp.A.T
    u = solve_exact(gram, r).solution
    v = lp.A.T @ u
    dy = np.asarray(dy_inexact, dtype=float)
    ds = -lp.A.T @ dy
    dx = beta * it.mu / it.s - it.x - (it.x / it.s) * ds - v
    return Direction(dx=dx, dy=dy, ds=ds, residual_hat=r, correction_v=v,
                     system=SystemKind.NES)


def recover_direction_oss(dy: np.ndarray, lam: np.ndarray, it: Iterate,
                          lp: LinearProgram, V: np.ndarray) -> Direction:
    """Direction from the orthogonal-subspaces formulation.

    ``dx = V lam`` lies in the null space and ``ds = -A^T dy`` in the row
    space, so primal and dual feasibility hold no matter how inexact the
    solve was; any residual lands in the centering row alone.
    """
    dx = V @ np.asarray(lam, dtype=float)
    ds = -lp.A.T @ np.asarray(dy, dtype=float)
    m = lp.m
    return Direction(dx=dx, dy=np.asarray(dy, dtype=float), ds=ds,
                     residual_hat=np.zeros(m), correction_v=np.zeros(lp.n),
                     system=SystemKind.OSS)


def recover_direction_fns(solution: np.ndarray, it: Iterate,
                          lp: LinearProgram) -> Direction:
    """Split a full-system solution vector into (dy, dx, ds)."""
    m, n = lp.m, lp.n
    sol = np.asarray(solution, dtype=float)
    return Direction(dx=sol[m:m + n], dy=sol[:m], ds=sol[m + n:],
                     residual_hat=np.zeros(m), correction_v=np.zeros(n),
                     system=SystemKind.FNS)


def recover_direction_as(solution: np.ndarray, it: Iterate, lp: LinearProgram,
                         beta: float) -> Direction:
    """Recover ds from an augmented-system solution via the centering row."""
    m, n = lp.m, lp.n
    sol = np.asarray(solution, dtype=float)
    dy, dx = sol[:m], sol[m:]
    ds = (beta * it.mu - it.x * it.s - it.s * dx) / it.x
    return Direction(dx=dx, dy=dy, ds=ds, residual_hat=np.zeros(m),
                     correction_v=np.zeros(n), system=SystemKind.AS)


def verify_direction(direction: Direction, it: Iterate, lp: LinearProgram,
                     beta: float, eta: float, theta: float) -> DirectionReport:
    """Measure how well a direction satisfies the corrected Newton system."""
    dx, dy, ds = direction.dx, direction.dy, direction.ds
    v = direction.correction_v
    mu = it.mu
    third = it.x * ds + it.s * dx - (beta * mu - it.x * it.s) + it.s * v
    sv_inf = float(np.linalg.norm(it.s * v, np.inf))
    r_hat = direction.residual_hat
    return DirectionReport(
        primal_residual=float(np.linalg.norm(lp.A @ dx, np.inf)),
        dual_residual=float(np.linalg.norm(lp.A.T @ dy + ds, np.inf)),
        third_row_residual=float(np.linalg.norm(third, np.inf)),
        dx_dot_ds=float(dx @ ds),
        sv_inf=sv_inf,
        sv_bound=eta * mu,
        sv_ok=bool(sv_inf <= eta * mu * (1.0 + 1e-12) + 1e-12),
        rhat_inf=float(np.linalg.norm(r_hat, np.inf)) if r_hat.size else 0.0,
        rhat_two=float(np.linalg.norm(r_hat)),
        rhat_bound=eta / np.sqrt(1.0 + theta) * np.sqrt(mu),
        mu=mu,
    )


def condition_number(system) -> float:
    """Spectral condition number sigma_max / sigma_min of a system matrix.

    Accepts an :class:`AssembledSystem` or a bare square matrix.
    """
    matrix = getattr(system, "matrix", system)
    sv = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    if not np.isfinite(sv).all():
        raise errors.SingularMatrix("singular values are not finite")
    if sv[-1] < 1e-300:
        raise errors.SingularMatrix("matrix numerically singular")
    return float(sv[0] / sv[-1])


def chi_bar(A: np.ndarray) -> float:
    """Exact max over bases B of ||A_B^{-1} A||_F by enumeration.

    Only feasible for tiny instances (n <= 12); bounds the condition
    number of the basis-preconditioned normal matrix by its square.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if n > 12:
        raise errors.TooLarge(f"basis enumeration limited to n <= 12, got n = {n}")
    scale = float(np.linalg.norm(A, 2))
    best = 0.0
    found = False
    for cols in itertools.combinations(range(n), m):
        A_B = A[:, cols]
        sv = np.linalg.svd(A_B, compute_uv=False)
        if sv[-1] <= 1e-10 * max(scale, 1.0):
            continue
        found = True
        best = max(best, float(np.linalg.norm(np.linalg.solve(A_B, A), "fro")))
    if not found:
        raise errors.RankDeficient("no nonsingular basis exists")
    return best
