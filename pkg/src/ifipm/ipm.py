"""Short-step inexact-feasible interior point loop and refinement driver.

The loop takes full Newton steps computed from any of the six system
formulations, solving each to an absolute residual target that keeps the
corrected step convergent:

* basis-scaled kinds (MNES/PNES): ``(eta / sqrt(1+theta)) * sqrt(mu)``
  in the 2-norm (the stricter of the two candidate norms);
* OSS: ``eta * mu`` — its solve residual lands directly in the centering
  row, so it must meet the row bound itself;
* plain NES: the pseudoinverse-correction admissibility level, capped by
  the basis-scaled target;
* FNS/AS: the basis-scaled target (no correction exists for them, so
  they are only safe with near-exact solvers).

The outer driver re-solves a scaled residual instance per loop: with
``scale = 1 / (x.s)`` the subproblem ``(A, scale*b, scale*s)`` warm-started
at ``(scale*x, 0, scale*s)`` is the nonnegative-variable equivalent of
refining the current point, and every update formula below follows from
substituting the shifted variable back.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import errors
from .newton import (
    SystemKind,
    assemble,
    condition_number,
    proc_a_residual_bound,
    recover_direction_as,
    recover_direction_fns,
    recover_direction_mnes,
    recover_direction_nes_procA,
    recover_direction_oss,
    select_basis_mwb,
)
from .problem import (
    Iterate,
    LinearProgram,
    PreprocessedProgram,
    in_neighborhood,
    preprocess,
    residuals,
)
from .solvers import ExactSolver

__all__ = [
    "IpmParams",
    "IterationRecord",
    "IpmTrace",
    "RefinementState",
    "ParameterCheck",
    "check_parameters",
    "exact_termination_threshold",
    "if_ipm",
    "ir_if_ipm",
]

log = logging.getLogger(__name__)

FEAS_RTOL = 1e-8  # feasibility maintained relative to 1 + ||b||, 1 + ||c||


@dataclass(frozen=True)
class ParameterCheck:
    ok: bool
    con1_ok: bool
    con2_ok: bool
    con1_lhs: float
    con1_rhs: float
    con2_lhs: float
    con2_rhs: float


def exact_termination_threshold(lp: LinearProgram, slope: float = 1.0) -> float:
    """Duality-measure level ``2**(-slope * L)`` for exact-solution rounding.

    ``L`` is the instance bit-length measure. Below this level an exact
    rational optimum could in principle be recovered by rounding; the
    rounding procedure itself is out of scope, and for all but the
    smallest integer instances the threshold underflows double
    precision, so this is exposed for completeness rather than use.
    """
    from .problem import binary_length

    return 2.0 ** (-slope * binary_length(lp))


def check_parameters(n: int, theta: float, eta: float, beta: float):
    """Evaluate the two convergence conditions literally.

    con1: ``beta <= 1 - (eta + 0.01)/sqrt(n)``
    con2: ``(theta^2 + n (1-beta)^2 + eta^2) / (2^{3/2} (1-theta)) + eta
    <= theta (beta - eta/sqrt(n))``

    Returns ``(ok, details)`` with both sides of each inequality.
    """
    if n < 1:
        raise errors.InvalidParameters("n must be at least 1")
    sqrt_n = math.sqrt(n)
    con1_lhs = beta
    con1_rhs = 1.0 - (eta + 0.01) / sqrt_n
    con2_lhs = (theta**2 + n * (1.0 - beta) ** 2 + eta**2) / (2**1.5 * (1.0 - theta)) + eta
    con2_rhs = theta * (beta - eta / sqrt_n)
    details = ParameterCheck(
        ok=(con1_lhs <= con1_rhs and con2_lhs <= con2_rhs),
        con1_ok=con1_lhs <= con1_rhs,
        con2_ok=con2_lhs <= con2_rhs,
        con1_lhs=con1_lhs,
        con1_rhs=con1_rhs,
        con2_lhs=con2_lhs,
        con2_rhs=con2_rhs,
    )
    return details.ok, details


@dataclass(frozen=True, eq=False)
class IpmParams:
    """Run parameters; ``beta=None`` resolves to ``1 - 0.2/sqrt(n)``.

    ``override_parameter_check=True`` lets a run proceed with parameters
    that fail :func:`check_parameters` (the verdict is still evaluated
    and attached to the trace). The validated preset ``theta=0.4,
    eta=0.1`` is the default; ``theta=0.7`` is accepted only with the
    override flag since it fails the second condition.
    """

    theta: float = 0.4
    eta: float = 0.1
    beta: Optional[float] = None
    zeta: float = 1e-6
    system: SystemKind = SystemKind.MNES
    solver: Callable = field(default_factory=ExactSolver)
    max_iterations: int = 0
    override_parameter_check: bool = False

    def __post_init__(self):
        if not 0.0 <= self.theta < 1.0:
            raise errors.InvalidParameters("theta must lie in [0, 1)")
        if not 0.0 <= self.eta < 1.0:
            raise errors.InvalidParameters("eta must lie in [0, 1)")
        if self.beta is not None and not 0.0 < self.beta < 1.0:
            raise errors.InvalidParameters("beta must lie in (0, 1)")
        if self.zeta <= 0.0:
            raise errors.InvalidParameters("zeta must be positive")

    def resolve_beta(self, n: int) -> float:
        return self.beta if self.beta is not None else 1.0 - 0.2 / math.sqrt(n)


@dataclass(frozen=True)
class IterationRecord:
    """One accepted step: state before, step quality, state after."""

    k: int
    mu: float
    kappa_system: float
    achieved_residual: float
    in_neighborhood: bool
    primal_inf: float
    dual_inf: float
    mu_ratio: float


@dataclass(frozen=True, eq=False)
class IpmTrace:
    records: tuple
    parameter_check: ParameterCheck


@dataclass(frozen=True, eq=False)
class RefinementState:
    """Snapshot after one outer refinement loop."""

    scale: float
    accumulated: Iterate
    loop_index: int
    gap: float
    mu: float
    inner_iterations: int
    max_kappa: float


def _solve_target(kind: SystemKind, eta: float, theta: float, it: Iterate,
                  lp: LinearProgram) -> float:
    base = eta / math.sqrt(1.0 + theta) * math.sqrt(it.mu)
    if kind is SystemKind.OSS:
        return eta * it.mu
    if kind is SystemKind.NES:
        return min(base, proc_a_residual_bound(it, lp, eta))
    return base


def _recover(system, solution, it, prep, beta):
    kind = system.kind
    if kind in (SystemKind.MNES, SystemKind.PNES):
        r_hat = system.matrix @ solution - system.rhs
        return recover_direction_mnes(solution, r_hat, it, prep, beta,
                                      basis=system.basis_used)
    if kind is SystemKind.NES:
        r = system.matrix @ solution - system.rhs
        return recover_direction_nes_procA(solution, r, it, prep.base, beta)
    if kind is SystemKind.OSS:
        m = prep.base.m
        return recover_direction_oss(solution[:m], solution[m:], it, prep.base,
                                     system.null_basis)
    if kind is SystemKind.FNS:
        return recover_direction_fns(solution, it, prep.base)
    return recover_direction_as(solution, it, prep.base, beta)


def if_ipm(prep: PreprocessedProgram, start: Iterate, params: IpmParams,
           observer: Optional[Callable] = None):
    """Short-step loop: assemble, solve to tolerance, correct, full step.

    Runs until ``mu <= params.zeta``. Every produced iterate must stay
    feasible and inside the neighborhood; an exit raises
    :class:`~ifipm.errors.LeftNeighborhood` since under the residual
    contract it signals a bug or an overridden parameter set.
    ``observer(k, iterate, system, direction, new_iterate)`` is invoked
    after each accepted step.

    Returns ``(final_iterate, trace)``.
    """
    lp = prep.base
    n = lp.n
    beta = params.resolve_beta(n)
    ok, pcheck = check_parameters(n, params.theta, params.eta, beta)
    log.debug("parameter check: %s", pcheck)
    if not ok and not params.override_parameter_check:
        raise errors.InvalidParameters(
            f"(beta={beta:.6f}, eta={params.eta}, theta={params.theta}, n={n}) "
            f"fail the convergence conditions: {pcheck}; "
            "pass override_parameter_check=True to run anyway")

    if not in_neighborhood(start, params.theta):
        raise errors.NotInNeighborhood(
            f"start is outside the theta={params.theta} neighborhood")
    b_scale = 1.0 + float(np.linalg.norm(lp.b, np.inf))
    c_scale = 1.0 + float(np.linalg.norm(lp.c, np.inf))
    r0 = residuals(lp, start)
    if r0.primal_inf > FEAS_RTOL * b_scale or r0.dual_inf > FEAS_RTOL * c_scale:
        raise errors.NotInNeighborhood(
            f"start infeasible: primal {r0.primal_inf:.2e}, dual {r0.dual_inf:.2e}")

    max_it = params.max_iterations
    if max_it <= 0:
        ratio = max(start.mu / params.zeta, math.e)
        max_it = math.ceil(10.0 * math.sqrt(n) * math.log(ratio)) + 64

    it = start
    records = []
    for k in range(max_it + 1):
        mu = it.mu
        if mu <= params.zeta:
            return it, IpmTrace(tuple(records), pcheck)
        if k == max_it:
            raise errors.MaxIterations(
                f"mu={mu:.3e} above zeta={params.zeta:.3e} after {max_it} iterations",
                iterate=it, trace=IpmTrace(tuple(records), pcheck))
        system = assemble(params.system, it, prep, beta)
        target = _solve_target(params.system, params.eta, params.theta, it, lp)
        report = params.solver(system.matrix, system.rhs, target)
        if not report.converged or report.achieved_residual > target * (1.0 + 1e-9):
            raise errors.SolverFailure(
                f"iteration {k}: residual {report.achieved_residual:.3e} "
                f"misses target {target:.3e} ({report.method})")
        direction = _recover(system, report.solution, it, prep, beta)
        new_it = Iterate(it.x + direction.dx, it.y + direction.dy,
                         it.s + direction.ds)
        r_new = residuals(lp, new_it)
        inside = in_neighborhood(new_it, params.theta)
        records.append(IterationRecord(
            k=k,
            mu=mu,
            kappa_system=condition_number(system),
            achieved_residual=report.achieved_residual,
            in_neighborhood=inside,
            primal_inf=r_new.primal_inf,
            dual_inf=r_new.dual_inf,
            mu_ratio=new_it.mu / mu,
        ))
        if observer is not None:
            observer(k, it, system, direction, new_it)
        if not inside:
            raise errors.LeftNeighborhood(
                f"iterate {k + 1} left the theta={params.theta} neighborhood")
        if (r_new.primal_inf > FEAS_RTOL * b_scale
                or r_new.dual_inf > FEAS_RTOL * c_scale):
            raise errors.LeftNeighborhood(
                f"iterate {k + 1} lost feasibility: primal {r_new.primal_inf:.2e}, "
                f"dual {r_new.dual_inf:.2e}")
        it = new_it
    raise AssertionError("unreachable")  # loop always returns or raises


def ir_if_ipm(lp: LinearProgram, start: Iterate, zeta: float, zeta_hat: float,
              params: IpmParams, basis=None, max_loops: int = 64):
    """Outer iterative refinement: repeat limited-precision solves.

    Each loop solves the current instance to roughly ``zeta_hat``
    precision, then rescales the residual problem by ``scale = 1/(x.s)``
    and warm-starts the next loop from ``(scale*x, 0, scale*s)``, until
    ``x.s / n <= zeta``. A loop that neither finishes nor contracts the
    gap by ``2 * zeta_hat`` raises :class:`~ifipm.errors.NoProgress`.

    The subproblem stop threshold is adapted per loop: a loop never runs
    deeper than needed to land the outer gap below ``n * zeta`` (running
    a heavily rescaled subproblem further than that pushes its absolute
    residual targets below what double precision can certify), and never
    shallower than a ``1.8 * zeta_hat`` contraction of its warm-start
    measure. Each refinement subproblem is re-preprocessed with the
    maximum-weight basis of its warm start, which keeps the basis-scaled
    system bounded even when the warm start sits close to an optimal
    face (any basis is admissible for the preprocessing, and this choice
    is the preconditioning one).

    Returns ``(final_iterate, states)`` with one
    :class:`RefinementState` per loop.
    """
    if zeta <= 0.0:
        raise errors.InvalidParameters("zeta must be positive")
    if not 0.0 < zeta_hat < 1.0:
        raise errors.InvalidParameters("zeta_hat must lie in (0, 1)")
    prep = preprocess(lp, basis)

    current, trace = if_ipm(prep, start, replace(params, zeta=zeta_hat,
                                                 max_iterations=0))
    gap = float(current.x @ current.s)
    states = [RefinementState(
        scale=1.0, accumulated=current, loop_index=1, gap=gap,
        mu=gap / lp.n, inner_iterations=len(trace.records),
        max_kappa=max((r.kappa_system for r in trace.records), default=0.0))]

    while gap / lp.n > zeta:
        if len(states) >= max_loops:
            raise errors.SolverFailure(f"refinement budget of {max_loops} loops exhausted")
        prev_gap = gap
        scale = 1.0 / gap
        mu_warm = scale / lp.n  # warm-start measure of the scaled subproblem
        sub_zeta = min(max(zeta_hat, 0.9 * zeta * scale * scale),
                       1.8 * zeta_hat * mu_warm)
        sub_lp = LinearProgram(lp.A, scale * lp.b, scale * current.s)
        warm = Iterate(scale * current.x, np.zeros(lp.m), scale * current.s)
        sub_prep = preprocess(sub_lp, basis=select_basis_mwb(warm, lp.A))
        refined, trace = if_ipm(sub_prep, warm,
                                replace(params, zeta=sub_zeta, max_iterations=0))
        x_new = refined.x / scale
        y_new = current.y + refined.y / scale
        s_new = lp.c - lp.A.T @ y_new
        current = Iterate(x_new, y_new, s_new)
        gap = float(current.x @ current.s)
        states.append(RefinementState(
            scale=scale, accumulated=current, loop_index=len(states) + 1,
            gap=gap, mu=gap / lp.n, inner_iterations=len(trace.records),
            max_kappa=max((r.kappa_system for r in trace.records), default=0.0)))
        if gap / lp.n > zeta and gap > 2.0 * zeta_hat * prev_gap:
            raise errors.NoProgress(
                f"loop {len(states)}: gap contracted only {gap / prev_gap:.3e}, "
                f"needs <= {2.0 * zeta_hat:.3e}")
    return current, states
