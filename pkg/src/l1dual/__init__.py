"""Sparse l1(N) regularization by duality: LP duals, polytopes, proximal recovery."""

from .norms import (
    SparseSeq,
    directsum_norm,
    l1_norm,
    norming_functional,
    norming_functional_directsum,
    sup_norm,
)
from .operators import (
    RowFamily,
    TrigRowFamily,
    TruncatedMatrix,
    apply_A,
    apply_Astar_prefix,
    peak_set,
    rows_from_spec,
    sup_norm_certified,
    truncate_matrix,
)
from .lp import InfeasibleError, LinearProgram, LpResult, SimplexError, min_l1_solve, solve_lp
from .polytope import (
    PolytopeError,
    SlabSystem,
    VertexSet,
    find_n0_by_objective,
    find_n0_by_vertices,
    vertex_enumerate,
)
from .fppa import FppaParams, FppaTrace, fppa_solve, prox_residual_l1, prox_scaled_l1
from .pipeline import (
    DualSolution,
    PrimalSolution,
    RegularizationProblem,
    assemble_dual_p1,
    assemble_dual_pgt1,
    solve_dual,
    solve_min_norm_interp,
    solve_regularized,
)
from .experiments import (
    ExperimentConfig,
    TableResult,
    TableRow,
    add_noise,
    gen_rows_trig,
    gen_truth_and_data,
    run_table,
)

__version__ = "0.1.0"
