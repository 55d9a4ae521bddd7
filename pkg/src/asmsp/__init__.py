"""Multi-stage preconditioning with adaptive setup for block reservoir Jacobians.

The package provides CSR storage and Matrix Market I/O, a greedy multi-color
grouping for parallel Gauss-Seidel, point and block smoothers, unsmoothed
aggregation AMG, the three-stage preconditioner and its adaptive-reuse driver,
restarted GMRES, synthetic problem generators, and a benchmark harness.
"""
from .amg import AggregationMap, AmgHierarchy, AmgParams, amg_setup, amg_vcycle, galerkin_coarsen, pairwise_aggregate
from .bench import RunConfig, Source, compare_smoothers, mu_sweep, run_benchmark
from .coloring import (
    AdjacencyGraph,
    ColoringPlan,
    build_adjacency,
    color_matrix,
    validate_plan,
    vertices_grouping,
    vertices_splitting,
)
from .errors import (
    ConvergenceError,
    DimensionMismatch,
    InvalidPermutation,
    InvalidPlanError,
    MatrixMarketError,
    SingularMatrixError,
)
from .krylov import GmresConfig, SolveStats, gmres_solve
from .msp import (
    AdaptiveSetup,
    AdaptiveState,
    Decision,
    MspConfig,
    MspPreconditioner,
    SequenceStats,
    TransferOperators,
    asmsp_decide,
    asmsp_solve_sequence,
    extract_concentration_matrix,
    extract_pressure_matrix,
    msp_apply,
    msp_setup,
    msp_solve,
)
from .parallel import get_num_threads, set_num_threads
from .problems import (
    BlockProblemSpec,
    BlockSystem,
    GridSpec,
    NewtonSequenceSpec,
    block_jacobian,
    newton_sequence,
    poisson2d,
    poisson3d,
    tpfa_pressure_matrix,
)
from .smoothers import (
    SmootherConfig,
    SmootherKind,
    bgs_apply,
    bgs_setup,
    bilu0_apply,
    bilu0_setup,
    gs_sweep_ordered,
    jacobi_sweep,
    pgs_mc_sweep,
)
from .sparse import (
    BlockLayout,
    Ordering,
    SparseMatrix,
    permute,
    permute_vec,
    read_matrix_market,
    read_vector,
    spmv,
    write_matrix_market,
    write_vector,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
