"""Experiment generators, noise model, metrics, and table reproduction.

The benchmark family samples trigonometric rows a_{j,k} = cos(jk)/k (and
sin for the upper half), takes the ground truth x_k = 1/(10 k^2), forms
y = A x by certified series summation, and perturbs it with seeded Gaussian
noise of deviation noise_factor * range(y).  A table sweep solves the dual
and primal problems across a list of regularization weights and reports the
paper-style columns plus both residual variants.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import polytope
from .fppa import FppaParams, operator_norm_2
from .norms import SparseSeq, l1_norm, sparse_diff_l2, sup_norm
from .operators import RowFamily, TrigRowFamily, rows_from_spec
from .pipeline import (
    RegularizationProblem,
    solve_dual,
    solve_min_norm_interp,
    solve_regularized,
)

TRUTH_SCALE = 0.1  # ground truth x_k = TRUTH_SCALE / k^2
SERIES_TAIL = 1e-12
_SERIES_CHUNK = 16384  # fixed so summation order (and bits) never varies


def gen_rows_trig(m: int) -> TrigRowFamily:
    """The benchmark row family; rejects odd m (rows come in cos/sin pairs)."""
    return TrigRowFamily(m)


@dataclass(frozen=True)
class GroundTruth:
    """The slowly decaying truth sequence x_k = scale / k^2."""

    scale: float = TRUTH_SCALE

    def value(self, k: int) -> float:
        return self.scale / float(k) ** 2

    def prefix(self, K: int) -> SparseSeq:
        return SparseSeq.from_pairs((k, self.value(k)) for k in range(1, K + 1))

    def tail_bound(self, K: int) -> float:
        # sum_{k>K} scale/k^3 <= scale / (2 K^2), with the 1/k envelope folded in
        return self.scale / (2.0 * K * K)


def gen_truth_and_data(rows: RowFamily, m: int | None = None):
    """Ground truth description and the noise-free data y = A x0.

    Each y_j is the series sum_k a_{j,k} x0_k summed to a cutoff whose
    envelope tail bound is below SERIES_TAIL.
    """
    if m is not None and m != rows.m:
        raise ValueError(f"m={m} disagrees with the row family (m={rows.m})")
    truth = GroundTruth()
    K = math.ceil(math.sqrt(truth.scale / (2.0 * SERIES_TAIL)))
    y = np.zeros(rows.m)
    k0 = 1
    while k0 <= K:
        k1 = min(k0 + _SERIES_CHUNK - 1, K)
        ks = np.arange(k0, k1 + 1)
        y += rows.columns(ks) @ (truth.scale / ks.astype(float) ** 2)
        k0 = k1 + 1
    return truth, y


def add_noise(y: np.ndarray, noise_factor: float, seed: int) -> np.ndarray:
    """y + Gaussian noise with deviation noise_factor * (max y - min y)."""
    y = np.asarray(y, dtype=float)
    spread = float(y.max() - y.min())
    if spread == 0.0:
        raise ValueError("data must not be constant (noise scale would vanish)")
    rng = np.random.default_rng(seed)
    return y + rng.normal(0.0, noise_factor * spread, y.size)


@dataclass(frozen=True)
class ExperimentConfig:
    m: int
    rho_list: tuple
    seed: int
    noise_factor: float = 1e-3
    generator: str = "trig"
    n0_strategy: object = "auto"  # "auto" | "vertices" | "objective" | int
    n0_rho: float | None = None  # rho for objective stabilization sweeps
    interp_data: str = "noisy"  # which data the ERR baseline interpolates
    support_tol: float = 1e-6
    fppa_max_iter: int = 200_000
    fppa_tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "rho_list", tuple(float(r) for r in self.rho_list))
        if not self.rho_list:
            raise ValueError("rho_list must be nonempty")
        if any(r <= 0 for r in self.rho_list):
            raise ValueError("every rho must be positive")
        if self.interp_data not in ("noisy", "clean"):
            raise ValueError("interp_data must be 'noisy' or 'clean'")
        if self.noise_factor < 0:
            raise ValueError("noise_factor must be nonnegative")


@dataclass
class TableRow:
    rho: float
    rho_lam_inf: float | None = None
    mu_inf: float | None = None
    S: float | None = None
    f_r: float | None = None
    SL: int | None = None
    ERR: float | None = None
    resid_y_l2: float | None = None
    resid_y0_l2: float | None = None
    branch: str | None = None
    error: str | None = None


@dataclass
class TableResult:
    config: ExperimentConfig
    n0: int
    rows: list
    interp_l1: float = math.nan


def _resolve_table_n0(config: ExperimentConfig, rows: RowFamily, y0: np.ndarray) -> int:
    strategy = config.n0_strategy
    if strategy == "auto":
        strategy = "vertices" if rows.m <= 12 else "objective"
    if isinstance(strategy, (int, np.integer)):
        return int(strategy)
    if strategy == "vertices":
        # slab polytopes at different rho are similar, so any rho works here
        n0, _ = polytope.find_n0_by_vertices(rows, 1.0)
        return n0
    if strategy == "objective":
        rho = config.n0_rho if config.n0_rho is not None else min(config.rho_list)
        return polytope.find_n0_by_objective(rows, y0, rho)
    raise ValueError(f"unknown n0 strategy {strategy!r}")


def run_table(config: ExperimentConfig, jobs: int = 1) -> TableResult:
    """Solve the full sweep over rho_list; failures are recorded per row."""
    rows_fam = rows_from_spec({"generator": config.generator, "m": config.m})
    _, y = gen_truth_and_data(rows_fam)
    y0 = add_noise(y, config.noise_factor, config.seed)
    n0 = _resolve_table_n0(config, rows_fam, y0)
    target = y0 if config.interp_data == "noisy" else y
    xdag = solve_min_norm_interp(rows_fam, target, support_tol=config.support_tol)

    def one(rho: float) -> TableRow:
        row = TableRow(rho=rho)
        try:
            problem = RegularizationProblem(rows_fam, y0, rho)
            dual = solve_dual(problem, n0, support_tol=config.support_tol)
            sigma = operator_norm_2(
                rows_fam.columns(np.asarray(dual.peak, dtype=np.int64))
            ) if dual.peak else 1.0
            params = FppaParams(
                0.99 / max(sigma, 1e-12),
                0.99 / max(sigma, 1e-12),
                config.fppa_max_iter,
                config.fppa_tol,
            )
            primal = solve_regularized(
                problem, dual=dual, params=params, support_tol=config.support_tol
            )
            resid_y0 = y0 - _apply(rows_fam, primal.x)
            resid_y = y - _apply(rows_fam, primal.x)
            row.rho_lam_inf = rho * dual.lam_inf
            row.mu_inf = dual.mu_supnorm
            row.S = dual.value
            row.f_r = primal.f_r
            row.SL = primal.sparsity
            row.ERR = sparse_diff_l2(primal.x, xdag)
            row.resid_y_l2 = float(np.linalg.norm(resid_y))
            row.resid_y0_l2 = float(np.linalg.norm(resid_y0))
            row.branch = primal.branch
        except Exception as err:  # recorded in-row; the sweep continues
            row.error = f"{type(err).__name__}: {err}"
        return row

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            table_rows = list(pool.map(one, config.rho_list))
    else:
        table_rows = [one(rho) for rho in config.rho_list]
    return TableResult(config, n0, table_rows, interp_l1=l1_norm(xdag))


def _apply(rows, x):
    from .operators import apply_A

    return apply_A(rows, x)


CSV_HEADER = (
    "rho,rho_lam_inf,Astar_lam_inf,S,f_r,SL,ERR,resid_y_l2,resid_y0_l2,branch,error"
)


def format_value(v) -> str:
    """Paper-style 4-significant-digit cell: fixed below 1e-3 flips to e-notation."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    if x == 0.0:
        return "0.0000"
    if abs(x) >= 1e-3:
        return f"{x:.4f}"
    return f"{x:.4e}"


def table_to_csv(result: TableResult) -> str:
    lines = [CSV_HEADER]
    for r in result.rows:
        cells = [
            format_value(r.rho),
            format_value(r.rho_lam_inf),
            format_value(r.mu_inf),
            format_value(r.S),
            format_value(r.f_r),
            "" if r.SL is None else str(r.SL),
            format_value(r.ERR),
            format_value(r.resid_y_l2),
            format_value(r.resid_y0_l2),
            r.branch or "",
            (r.error or "").replace(",", ";"),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def table_to_json(result: TableResult) -> str:
    """Machine-precision sidecar; key order and float reprs are deterministic."""
    payload = {
        "config": asdict(result.config),
        "n0": result.n0,
        "interp_l1": result.interp_l1,
        "rows": [asdict(r) for r in result.rows],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
