"""Fixed-point proximity iteration for min |y0 - A z|_1 + rho |z|_1.

Both proximity operators have closed forms: the regularizer's is plain soft
thresholding, the fidelity term's clamps each coordinate into a band around
the data.  The two-line primal-dual scheme converges whenever
beta * gamma * |A|_2^2 < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class FppaDivergenceError(RuntimeError):
    """Iterates became non-finite; step sizes violate the convergence bound."""


def prox_scaled_l1(w: np.ndarray, t: float) -> np.ndarray:
    """Soft threshold at level t >= 0 (prox of t * l1-norm)."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    w = np.asarray(w, dtype=float)
    return np.sign(w) * np.maximum(np.abs(w) - t, 0.0)


def prox_residual_l1(w: np.ndarray, y: np.ndarray, s: float) -> np.ndarray:
    """Prox of s-scaled |y - .|_1: clamp each w_j into [y_j - s, y_j + s] edges.

    Returns w_j - s above the band, w_j + s below it, and y_j inside.
    """
    if s < 0:
        raise ValueError("scale must be nonnegative")
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    if w.shape != y.shape:
        raise ValueError("w and y must have matching length")
    return np.where(w > y + s, w - s, np.where(w < y - s, w + s, y))


def operator_norm_2(A: np.ndarray, iters: int = 100) -> float:
    """Largest singular value by power iteration with a deterministic start."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    v = np.ones(n) / math.sqrt(n)
    sigma = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        sigma = math.sqrt(nw)
    return sigma


@dataclass(frozen=True)
class FppaParams:
    beta: float
    gamma: float
    max_iter: int = 200_000
    tol: float = 1e-10

    def __post_init__(self):
        if self.beta <= 0 or self.gamma <= 0:
            raise ValueError("beta and gamma must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def validate_for(self, op_norm: float):
        prod = self.beta * self.gamma * op_norm**2
        if not prod < 1.0:
            raise ValueError(
                f"beta * gamma * |A|_2^2 = {prod:.6g} must be < 1 for convergence"
            )

    @classmethod
    def default_for(cls, A: np.ndarray, max_iter: int = 200_000, tol: float = 1e-10):
        """beta = gamma = 0.99 / |A|_2, so the step product is 0.9801."""
        sigma = operator_norm_2(A)
        if sigma == 0.0:
            sigma = 1.0
        s = 0.99 / sigma
        return cls(s, s, max_iter, tol)


@dataclass(frozen=True)
class FppaTrace:
    iterations: int
    final_objective: float
    converged: bool


def objective(A: np.ndarray, y0: np.ndarray, rho: float, z: np.ndarray) -> float:
    return float(np.sum(np.abs(y0 - A @ z)) + rho * np.sum(np.abs(z)))


def fppa_solve(
    Amat,
    y0: np.ndarray,
    rho: float,
    params: FppaParams | None = None,
    z_init: np.ndarray | None = None,
    v_init: np.ndarray | None = None,
):
    """Run the proximity iteration; returns (z, trace).

    z step: soft threshold of z - beta * A^T v at level beta * rho.
    v step: gamma * (I - prox of the fidelity term at scale 1/gamma) applied
    to v / gamma + A (2 z_new - z).  Stops when the relative l2 change of the
    stacked iterate drops below params.tol.
    """
    A = np.asarray(getattr(Amat, "data", Amat), dtype=float)
    y0 = np.asarray(y0, dtype=float)
    m, n = A.shape
    if y0.shape != (m,):
        raise ValueError("y0 length must match the row count of A")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if params is None:
        params = FppaParams.default_for(A)
    params.validate_for(operator_norm_2(A))
    z = np.zeros(n) if z_init is None else np.asarray(z_init, dtype=float).copy()
    v = np.zeros(m) if v_init is None else np.asarray(v_init, dtype=float).copy()

    beta, gamma = params.beta, params.gamma
    At = A.T.copy()
    thresh = beta * rho
    inv_gamma = 1.0 / gamma
    converged = False
    it = 0
    for it in range(1, params.max_iter + 1):
        z_new = prox_scaled_l1(z - beta * (At @ v), thresh)
        w = inv_gamma * v + A @ (2.0 * z_new - z)
        v_new = gamma * (w - prox_residual_l1(w, y0, inv_gamma))
        dz = z_new - z
        dv = v_new - v
        step = math.sqrt(float(dz @ dz + dv @ dv))
        size = math.sqrt(float(z_new @ z_new + v_new @ v_new))
        z, v = z_new, v_new
        if not (math.isfinite(step) and math.isfinite(size)):
            raise FppaDivergenceError(
                f"non-finite iterate at iteration {it}; check step sizes"
            )
        if step <= params.tol * max(1.0, size):
            converged = True
            break
    return z, FppaTrace(it, objective(A, y0, rho, z), converged)
