"""End-to-end duality scheme for the l1(N) regularization problem at p = 1.

The chain: assemble the dual linear program over the slab polytope and unit
box, solve it, decide between the zero solution and a finite reduction by
comparing rho |lam|_inf against |A_* lam|_inf, identify the peak set of
A_* lam, solve the truncated finite problem, and scatter the finite solution
back into the sequence space.  The p > 1 dual is assembled (objective and
constraint callables) but not solved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import polytope
from .fppa import FppaParams, fppa_solve, objective as finite_objective
from .lp import InfeasibleError, LinearProgram, solve_lp
from .norms import SparseSeq, l1_norm, sup_norm
from .operators import (
    RowFamily,
    apply_A,
    peak_set,
    sup_norm_certified,
    truncate_matrix,
)

BRANCH_TIE_REL = 1e-9
SUPPORT_TOL = 1e-6
STRIP_REL = 1e-12
CROSS_CHECK_REL = 1e-5
CROSS_CHECK_MAX_COLS = 40


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegularizationProblem:
    """min |y0 - A x|_1^p + rho |x|_1^p over finitely supported x (p = 1 path)."""

    rows: RowFamily
    y0: np.ndarray
    rho: float
    p: float = 1.0

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=float)
        if y0.shape != (self.rows.m,):
            raise ValueError("y0 length must equal the number of rows")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not 1 <= self.p < math.inf:
            raise ValueError("p must lie in [1, inf)")
        object.__setattr__(self, "y0", y0)


@dataclass
class DualSolution:
    lam: np.ndarray
    value: float  # S, the dual optimum
    mu_prefix: SparseSeq
    mu_supnorm: float
    peak: tuple
    n0: int
    lam_inf: float = 0.0
    cert: object = None


@dataclass
class PrimalSolution:
    x: SparseSeq
    f_r: float
    branch: str  # "zero" | "finite"
    sparsity: int
    diagnostics: dict = field(default_factory=dict)


def assemble_dual_p1(problem: RegularizationProblem, n0: int) -> LinearProgram:
    """Dual LP: max y0 . lam s.t. |lam_j| <= 1 and |sum_j lam_j a_{j,k}| <= rho.

    The box rows encode the dual unit ball of the l1 fidelity norm; the slab
    rows truncate the sup-norm constraint on A_* lam to the first n0 indices.
    """
    if problem.p != 1:
        raise ValueError("the linear dual is assembled only for p = 1")
    if n0 < 1:
        raise ValueError("n0 must be a positive integer")
    rows = problem.rows
    m = rows.m
    eye = np.eye(m)
    normals = rows.block(1, n0).T
    A = np.vstack([eye, -eye, normals, -normals])
    b = np.concatenate([np.ones(2 * m), np.full(2 * n0, problem.rho)])
    return LinearProgram.build(problem.y0, list(zip(A, b)))


@dataclass(frozen=True)
class NonlinearDual:
    """Evaluable description of the p > 1 dual problem (no solver attached)."""

    p: float
    p_conj: float
    rho: float

    objective: object  # callable lam -> y0 . lam
    constraint: object  # callable lam -> dual-ball functional, feasible iff <= 1

    def feasible(self, lam, tol: float = 1e-12) -> bool:
        return self.constraint(lam) <= 1.0 + tol


def assemble_dual_pgt1(problem: RegularizationProblem) -> NonlinearDual:
    """Dual description for p in (1, inf):

    maximize y0 . lam subject to
    (|lam|_inf)^p' + rho^(1 - p') |A_* lam|_inf^p' <= 1.
    """
    p = problem.p
    if not 1 < p < math.inf:
        raise ValueError("assemble_dual_pgt1 requires p in (1, inf)")
    pc = p / (p - 1.0)
    rows, y0, rho = problem.rows, problem.y0, problem.rho

    def obj(lam):
        return float(np.asarray(lam, dtype=float) @ y0)

    def constraint(lam):
        lam = np.asarray(lam, dtype=float)
        if not np.any(lam):
            return 0.0
        mu_inf = sup_norm_certified(rows, lam).value
        return float(sup_norm(lam) ** pc + rho ** (1.0 - pc) * mu_inf**pc)

    return NonlinearDual(p, pc, rho, obj, constraint)


def _resolve_n0(problem: RegularizationProblem, n0_strategy, include_box: bool = True) -> int:
    if isinstance(n0_strategy, (int, np.integer)):
        if n0_strategy < 1:
            raise ValueError("fixed n0 must be positive")
        return int(n0_strategy)
    if n0_strategy == "vertices":
        n0, _ = polytope.find_n0_by_vertices(problem.rows, problem.rho)
        return n0
    if n0_strategy == "objective":
        return polytope.find_n0_by_objective(
            problem.rows, problem.y0, problem.rho, include_box=include_box
        )
    raise ValueError(
        f"unknown n0 strategy {n0_strategy!r}; expected 'vertices', 'objective', or an int"
    )


def _certified_dual_solve(
    rows: RowFamily,
    y0: np.ndarray,
    rho: float,
    n0: int,
    include_box: bool,
    max_rounds: int = 60,
):
    """Solve the truncated dual and regenerate constraints until certified.

    A truncation heuristic may stabilize the optimum value while the solver
    still returns a maximizer that violates slabs beyond the cutoff (alternate
    optima).  The certified sup norm of A_* lam exposes any such violation;
    the slab set is then extended through the worst violating index and the
    LP re-solved.  Terminates because the full slab system is finitely active.
    """
    m = rows.m
    for _ in range(max_rounds):
        normals = rows.block(1, n0).T
        blocks = [normals, -normals]
        rhs = [np.full(n0, rho), np.full(n0, rho)]
        if include_box:
            eye = np.eye(m)
            blocks = [eye, -eye] + blocks
            rhs = [np.ones(m), np.ones(m)] + rhs
        lp_prob = LinearProgram.build(
            y0, list(zip(np.vstack(blocks), np.concatenate(rhs)))
        )
        res = solve_lp(lp_prob)
        if res.status != "optimal":
            raise PipelineError(f"dual LP returned status {res.status}")
        cert = sup_norm_certified(rows, res.argmax)
        if cert.value <= rho * (1.0 + BRANCH_TIE_REL):
            return res, cert, n0
        violated = np.nonzero(np.abs(cert.prefix) > rho * (1.0 + BRANCH_TIE_REL))[0]
        n0 = max(n0 + 1, int(violated[-1]) + 1)
    raise PipelineError(
        f"constraint generation did not certify dual feasibility in {max_rounds} rounds"
    )


def solve_dual(
    problem: RegularizationProblem,
    n0_strategy="vertices",
    support_tol: float = SUPPORT_TOL,
) -> DualSolution:
    """Solve the p = 1 dual LP and certify the induced sequence A_* lam."""
    if problem.p != 1:
        raise ValueError("solve_dual implements the p = 1 path")
    if not np.any(problem.y0):
        # degenerate data: the dual optimum is 0 at lam = 0
        return DualSolution(
            np.zeros(problem.rows.m), 0.0, SparseSeq.zero(), 0.0, (), 0
        )
    n0 = _resolve_n0(problem, n0_strategy)
    res, cert, n0 = _certified_dual_solve(
        problem.rows, problem.y0, problem.rho, n0, include_box=True
    )
    lam = res.argmax
    peaks = tuple(peak_set(cert, support_tol))
    return DualSolution(
        lam,
        res.value,
        cert.prefix_seq(),
        cert.value,
        peaks,
        n0,
        lam_inf=sup_norm(lam),
        cert=cert,
    )


def _exact_finite_lp(A: np.ndarray, y0: np.ndarray, rho: float):
    """Split-variable LP for min |y0 - A z|_1 + rho |z|_1 (oracle use)."""
    m, n = A.shape
    nv = 2 * n + m
    c = np.zeros(nv)
    c[: 2 * n] = -rho
    c[2 * n :] = -1.0
    top = np.hstack([A, -A, -np.eye(m)])
    bot = np.hstack([-A, A, -np.eye(m)])
    lp_prob = LinearProgram(
        c,
        np.vstack([top, bot]),
        np.concatenate([y0, -y0]),
        np.zeros(nv),
        np.full(nv, math.inf),
    )
    res = solve_lp(lp_prob)
    if res.status != "optimal":
        raise PipelineError(f"finite LP oracle returned {res.status}")
    z = res.argmax[:n] - res.argmax[n : 2 * n]
    return z, -res.value


def solve_regularized(
    problem: RegularizationProblem,
    n0_strategy="vertices",
    dual: DualSolution | None = None,
    params: FppaParams | None = None,
    support_tol: float = SUPPORT_TOL,
    cross_check: bool = False,
) -> PrimalSolution:
    """Five-step scheme: dual solve, branch test, truncation, finite solve,
    augmentation.  The reported objective f_r is recomputed on the original
    problem from the augmented solution, never read off the subproblem.
    """
    if problem.p != 1:
        raise ValueError("solve_regularized implements the p = 1 path")
    rows, y0, rho = problem.rows, problem.y0, problem.rho
    if dual is None:
        dual = solve_dual(problem, n0_strategy, support_tol)

    diagnostics = {
        "S": dual.value,
        "rho_lam_inf": rho * dual.lam_inf,
        "mu_inf": dual.mu_supnorm,
        "n0": dual.n0,
    }

    if not np.any(y0):
        x = SparseSeq.zero()
        return PrimalSolution(x, 0.0, "zero", 0, diagnostics)

    gap = rho * dual.lam_inf - dual.mu_supnorm
    tie_band = BRANCH_TIE_REL * max(rho * dual.lam_inf, dual.mu_supnorm, 1e-300)
    if gap > tie_band:
        x = SparseSeq.zero()
        f_r = l1_norm(y0)
        diagnostics.update(resid_l1=f_r, resid_l2=float(np.linalg.norm(y0)))
        return PrimalSolution(x, f_r, "zero", 0, diagnostics)

    if not dual.peak:
        raise PipelineError("finite branch taken but the peak set is empty")
    Amat = truncate_matrix(rows, dual.peak)
    z, trace = fppa_solve(Amat, y0, rho, params=params)
    diagnostics.update(fppa_iterations=trace.iterations, fppa_converged=trace.converged,
                       fppa_objective=trace.final_objective)

    if cross_check and Amat.data.shape[1] <= CROSS_CHECK_MAX_COLS:
        z_lp, f_lp = _exact_finite_lp(Amat.data, y0, rho)
        diagnostics["lp_objective"] = f_lp
        if trace.final_objective > f_lp + CROSS_CHECK_REL * max(1.0, abs(f_lp)):
            # the proximal iterate fell short; prefer the exact vertex
            z = z_lp
            diagnostics["fppa_replaced_by_lp"] = True

    strip = STRIP_REL * max(1.0, float(np.max(np.abs(z), initial=0.0)))
    x = SparseSeq.from_pairs(
        (k, float(val)) for k, val in zip(dual.peak, z) if abs(val) > strip
    )
    resid = y0 - apply_A(rows, x)
    f_r = l1_norm(resid) + rho * l1_norm(x)
    diagnostics.update(
        resid_l1=l1_norm(resid), resid_l2=float(np.linalg.norm(resid))
    )
    return PrimalSolution(x, f_r, "finite", len(x), diagnostics)


def solve_min_norm_interp(
    rows: RowFamily,
    y: np.ndarray,
    l_start: int | None = None,
    support_tol: float = SUPPORT_TOL,
    n0: int | None = None,
) -> SparseSeq:
    """Minimum-l1-norm interpolant of A x = y via the box-free dual.

    Solves max y . lam over |A_* lam|_inf <= 1 (slabs truncated by objective
    stabilization), restricts to the peak set of A_* lam, and solves the
    finite equality-constrained l1 minimization.  An inconsistent truncated
    system is retried once with a widened peak band before failing.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (rows.m,):
        raise ValueError("y length must equal the number of rows")
    if not np.any(y):
        raise ValueError("interpolation requires y != 0")
    if n0 is None:
        n0 = polytope.find_n0_by_objective(
            rows, y, 1.0, l_start=l_start, include_box=False
        )
    res, cert, n0 = _certified_dual_solve(rows, y, 1.0, n0, include_box=False)

    from .lp import min_l1_solve

    last_err = None
    for tol in (support_tol, support_tol * 100.0):
        peaks = peak_set(cert, tol)
        Amat = truncate_matrix(rows, peaks)
        try:
            z = min_l1_solve(Amat, y)
        except InfeasibleError as err:
            last_err = err
            continue
        strip = STRIP_REL * max(1.0, float(np.max(np.abs(z), initial=0.0)))
        return SparseSeq.from_pairs(
            (k, float(val)) for k, val in zip(peaks, z) if abs(val) > strip
        )
    raise InfeasibleError(
        f"truncated interpolation system stayed inconsistent after widening: {last_err}"
    )
