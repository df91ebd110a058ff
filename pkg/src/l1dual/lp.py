"""Deterministic dense-tableau simplex for inequality-form maximization.

Programs are stated as: maximize c.x subject to row_i . x <= rhs_i and
per-variable bounds lo <= x <= hi (infinities allowed).  The solver reduces
to standard form (shift / reflect / split), runs a two-phase tableau simplex
with Dantzig pricing, and falls back to Bland's rule whenever the objective
stalls on degenerate pivots, which guarantees termination.  Identical inputs
take identical pivot paths, so results are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9
RC_TOL = 1e-9
PIVOT_TOL = 1e-9
STALL_LIMIT = 400
MAX_ITER = 200_000


class SimplexError(RuntimeError):
    """Pivoting failed to make progress within the iteration cap."""


class InfeasibleError(RuntimeError):
    """Raised by solvers that require a feasible program."""


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective.x  s.t.  constraint_matrix @ x <= rhs,  lo <= x <= hi."""

    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        A = np.asarray(self.constraint_matrix, dtype=float)
        b = np.asarray(self.rhs, dtype=float)
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if A.ndim != 2 or A.shape[1] != c.size:
            raise ValueError("constraint rows must have length equal to the variable count")
        if b.shape != (A.shape[0],):
            raise ValueError("rhs length must equal the number of constraint rows")
        if lo.shape != c.shape or hi.shape != c.shape:
            raise ValueError("bounds must have one (lo, hi) per variable")
        if np.any(lo > hi):
            raise ValueError("every lower bound must not exceed its upper bound")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def build(cls, objective, constraints=(), bounds=None) -> "LinearProgram":
        """Assemble from (row, rhs) pairs and optional per-variable (lo, hi)."""
        c = np.asarray(objective, dtype=float)
        n = c.size
        if constraints:
            A = np.vstack([np.asarray(row, dtype=float) for row, _ in constraints])
            b = np.asarray([rhs for _, rhs in constraints], dtype=float)
        else:
            A = np.zeros((0, n))
            b = np.zeros(0)
        if bounds is None:
            lo = np.full(n, -math.inf)
            hi = np.full(n, math.inf)
        else:
            lo = np.asarray([p[0] for p in bounds], dtype=float)
            hi = np.asarray([p[1] for p in bounds], dtype=float)
        return cls(c, A, b, lo, hi)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    argmax: np.ndarray | None
    value: float
    row_duals: np.ndarray | None = None
    iterations: int = 0
    feasibility_violation: float = 0.0
    certificate_residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def _reduce(lp: LinearProgram):
    """Rewrite with nonnegative variables: shift, reflect, or split each one.

    Returns (A, b, c, const, recover) where recover maps a u-vector back to x.
    Two-sided finite bounds append an extra row u_j <= hi - lo.
    """
    n = lp.n_vars
    cols = []
    c_parts = []
    offset = np.zeros(n)
    plan = []  # (kind, u-slot(s)) per original variable
    A0, c0 = lp.constraint_matrix, lp.objective
    slot = 0
    extra_rows = []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        col = A0[:, j] if A0.size else np.zeros(0)
        if math.isinf(lo) and math.isinf(hi):
            cols.append(col)
            cols.append(-col)
            c_parts.extend([c0[j], -c0[j]])
            plan.append(("split", slot, slot + 1))
            slot += 2
        elif not math.isinf(lo):
            offset[j] = lo
            cols.append(col)
            c_parts.append(c0[j])
            plan.append(("shift", slot, lo))
            if not math.isinf(hi):
                extra_rows.append((slot, hi - lo))
            slot += 1
        else:  # lo = -inf, hi finite
            offset[j] = hi
            cols.append(-col)
            c_parts.append(-c0[j])
            plan.append(("reflect", slot, hi))
            slot += 1

    A = np.column_stack(cols) if cols else np.zeros((lp.n_rows, 0))
    b = lp.rhs - (A0 @ offset if A0.size else 0.0)
    c = np.asarray(c_parts, dtype=float)
    const = float(c0 @ offset)
    if extra_rows:
        pad = np.zeros((len(extra_rows), slot))
        pad_b = np.zeros(len(extra_rows))
        for i, (s, ub) in enumerate(extra_rows):
            pad[i, s] = 1.0
            pad_b[i] = ub
        A = np.vstack([A, pad])
        b = np.concatenate([b, pad_b])

    def recover(u: np.ndarray) -> np.ndarray:
        x = np.zeros(n)
        for j, item in enumerate(plan):
            if item[0] == "split":
                x[j] = u[item[1]] - u[item[2]]
            elif item[0] == "shift":
                x[j] = item[2] + u[item[1]]
            else:
                x[j] = item[2] - u[item[1]]
        return x

    return A, b, c, const, recover


class _Tableau:
    """Dense tableau over the working columns; maximization."""

    def __init__(self, A, b, c):
        self.T = np.asarray(A, dtype=float).copy()
        self.b = np.asarray(b, dtype=float).copy()
        self.c = np.asarray(c, dtype=float).copy()
        self.rc = self.c.copy()
        self.value = 0.0
        self.basis = np.full(self.T.shape[0], -1, dtype=int)
        self.iterations = 0

    def set_basis(self, basis):
        self.basis = np.asarray(basis, dtype=int)
        cb = self.c[self.basis]
        self.rc = self.c - cb @ self.T
        self.value = float(cb @ self.b)

    def pivot(self, row, col):
        T, b = self.T, self.b
        piv = T[row, col]
        T[row] /= piv
        b[row] /= piv
        factor = T[:, col].copy()
        factor[row] = 0.0
        T -= np.outer(factor, T[row])
        b -= factor * b[row]
        gain = self.rc[col]
        self.rc -= gain * T[row]
        self.value += gain * b[row]
        self.basis[row] = col

    def optimize(self, allowed: np.ndarray, max_iter: int) -> str:
        """Run pivots until no allowed column has positive reduced cost.

        Dantzig pricing with a deterministic Bland fallback after a stall of
        degenerate pivots; returns "optimal" or "unbounded".
        """
        bland = False
        best = self.value
        since_improve = 0
        while True:
            rc = np.where(allowed, self.rc, -math.inf)
            if bland:
                cand = np.nonzero(rc > RC_TOL)[0]
                if cand.size == 0:
                    return "optimal"
                col = int(cand[0])
            else:
                col = int(np.argmax(rc))
                if rc[col] <= RC_TOL:
                    return "optimal"
            colvals = self.T[:, col]
            pos = colvals > PIVOT_TOL
            if not np.any(pos):
                return "unbounded"
            ratios = np.where(pos, self.b / np.where(pos, colvals, 1.0), math.inf)
            best_ratio = ratios.min()
            ties = np.nonzero(ratios <= best_ratio + 1e-12 * (1.0 + abs(best_ratio)))[0]
            # smallest basis index among ties: Bland-compatible, deterministic
            row = int(ties[np.argmin(self.basis[ties])])
            self.pivot(row, col)
            self.iterations += 1
            if self.iterations > max_iter:
                raise SimplexError(f"simplex exceeded {max_iter} pivots without converging")
            if self.value > best + 1e-12 * (1.0 + abs(best)):
                best = self.value
                since_improve = 0
                bland = False
            else:
                since_improve += 1
                if since_improve >= STALL_LIMIT:
                    bland = True


def solve_lp(lp: LinearProgram, max_iter: int = MAX_ITER) -> LpResult:
    """Solve a LinearProgram; deterministic and anti-cycling.

    Returns an optimal vertex, or status "infeasible" / "unbounded".  On an
    optimal return, row_duals carries the multipliers of the original rows and
    certificate_residual the worst complementary-slackness defect.
    """
    A, b, c, const, recover = _reduce(lp)
    n_rows, n_u = A.shape
    n_orig_rows = lp.n_rows

    neg = b < 0
    sign = np.where(neg, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    slack = np.eye(n_rows) * sign[:, None]
    n_art = int(np.count_nonzero(neg))

    if n_art:
        art = np.zeros((n_rows, n_art))
        art[np.nonzero(neg)[0], np.arange(n_art)] = 1.0
        full = np.hstack([A, slack, art])
        c1 = np.zeros(full.shape[1])
        c1[n_u + n_rows :] = -1.0
        tab = _Tableau(full, b, c1)
        basis = np.where(
            neg,
            n_u + n_rows + np.cumsum(neg) - 1,
            n_u + np.arange(n_rows),
        )
        tab.set_basis(basis)
        allowed = np.ones(full.shape[1], dtype=bool)
        status = tab.optimize(allowed, max_iter)
        if status != "optimal" or tab.value < -1e-7:
            return LpResult("infeasible", None, math.nan, iterations=tab.iterations)
        # drive leftover artificials out of the basis; drop redundant rows
        art_cols = set(range(n_u + n_rows, full.shape[1]))
        drop_rows = []
        for i in range(n_rows):
            if tab.basis[i] in art_cols:
                row_piv = np.abs(tab.T[i, : n_u + n_rows])
                j = int(np.argmax(row_piv))
                if row_piv[j] > PIVOT_TOL:
                    tab.pivot(i, j)
                else:
                    drop_rows.append(i)
        keep = np.setdiff1d(np.arange(n_rows), drop_rows)
        T2 = tab.T[np.ix_(keep, np.arange(n_u + n_rows))]
        b2 = tab.b[keep]
        tab2 = _Tableau(np.zeros((len(keep), n_u + n_rows)), b2, np.concatenate([c, np.zeros(n_rows)]))
        tab2.T = T2
        tab2.set_basis(tab.basis[keep])
        tab2.iterations = tab.iterations
        tab = tab2
        row_of = {int(r): i for i, r in enumerate(keep)}
    else:
        full = np.hstack([A, slack])
        tab = _Tableau(full, b, np.concatenate([c, np.zeros(n_rows)]))
        tab.set_basis(n_u + np.arange(n_rows))
        row_of = {i: i for i in range(n_rows)}

    allowed = np.ones(tab.T.shape[1], dtype=bool)
    status = tab.optimize(allowed, max_iter)
    if status == "unbounded":
        return LpResult("unbounded", None, math.inf, iterations=tab.iterations)

    u = np.zeros(n_u + n_rows)
    u[tab.basis] = tab.b
    x = recover(u[:n_u])
    value = float(lp.objective @ x)

    # duals of the original <= rows: negated reduced costs of their slacks
    duals = np.zeros(n_orig_rows)
    for i in range(n_orig_rows):
        if i in row_of:
            duals[i] = -tab.rc[n_u + i]

    viol = 0.0
    if lp.n_rows:
        viol = float(np.max(lp.constraint_matrix @ x - lp.rhs, initial=0.0))
    viol = max(
        viol,
        float(np.max(lp.lower - x, initial=0.0)),
        float(np.max(x - lp.upper, initial=0.0)),
    )
    cert = _certificate_residual(lp, x, duals)
    return LpResult(
        "optimal",
        x,
        value,
        row_duals=duals,
        iterations=tab.iterations,
        feasibility_violation=viol,
        certificate_residual=cert,
    )


def _certificate_residual(lp: LinearProgram, x: np.ndarray, duals: np.ndarray) -> float:
    """Worst defect among dual sign, complementary slackness, and row activity."""
    worst = float(np.max(-duals, initial=0.0))
    if lp.n_rows:
        slackness = lp.rhs - lp.constraint_matrix @ x
        worst = max(worst, float(np.max(np.abs(duals * slackness), initial=0.0)))
    return worst


def min_l1_solve(Amat, y: np.ndarray) -> np.ndarray:
    """Minimum-l1-norm solution of A z = y via the split-variable program.

    Writes z = u - v with u, v >= 0 and minimizes sum(u + v) subject to the
    pair of inequalities A(u - v) <= y and -A(u - v) <= -y.  Raises
    InfeasibleError when the equality system has no solution.
    """
    A = np.asarray(getattr(Amat, "data", Amat), dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = A.shape
    if y.shape != (m,):
        raise ValueError("y length must match the row count of A")
    G = np.hstack([A, -A])
    rows = np.vstack([G, -G])
    rhs = np.concatenate([y, -y])
    obj = -np.ones(2 * n)
    lp_prob = LinearProgram(
        obj, rows, rhs, np.zeros(2 * n), np.full(2 * n, math.inf)
    )
    res = solve_lp(lp_prob)
    if res.status == "infeasible":
        raise InfeasibleError("equality system A z = y has no solution")
    if res.status != "optimal":
        raise SimplexError(f"unexpected status {res.status} for min-l1 program")
    u, v = res.argmax[:n], res.argmax[n:]
    return u - v
