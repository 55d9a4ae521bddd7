"""Pointwise and blockwise relaxation.

Pointwise: Jacobi, Gauss-Seidel in a prescribed order, and multi-color
parallel Gauss-Seidel over a :class:`~asmsp.coloring.ColoringPlan`.
Blockwise: block Gauss-Seidel and block ILU(0) on cell-blocked matrices.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels as K
from .coloring import ColoringPlan, build_adjacency, validate_plan
from .errors import DimensionMismatch, InvalidPermutation, InvalidPlanError, SingularMatrixError
from .parallel import resolve_threads, run_chunked
from .sparse import INDEX_DTYPE, BlockLayout, Ordering, SparseMatrix, inverse_permutation, permute


class SmootherKind(str, enum.Enum):
    JACOBI = "jacobi"
    GS = "gs"                  # sequential, natural row order
    GS_COLOR = "gs-color"      # sequential, rows visited in color-group order
    PGS_MC = "pgs-mc"          # color groups, rows of a group updated concurrently


@dataclass(frozen=True)
class SmootherConfig:
    kind: SmootherKind = SmootherKind.PGS_MC
    sweeps: int = 1
    plan: ColoringPlan | None = None
    omega: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SmootherKind(self.kind))
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")


def _diag_checked(A: SparseMatrix) -> np.ndarray:
    if A.nrows != A.ncols:
        raise DimensionMismatch("relaxation needs a square matrix")
    d = A.diagonal()
    zero = np.flatnonzero(d == 0)
    if zero.size:
        raise SingularMatrixError(f"zero diagonal entry in row {zero[0]}", index=int(zero[0]))
    return d


def _vectors(A, x, b):
    x = np.array(x, dtype=np.float64, copy=True)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if x.shape != (A.nrows,) or b.shape != (A.nrows,):
        raise DimensionMismatch("x and b must match the matrix size")
    return x, b


def jacobi_sweep(A: SparseMatrix, x, b, sweeps: int = 1, omega: float = 1.0, threads=None) -> np.ndarray:
    """``sweeps`` (optionally damped) Jacobi steps; returns the new iterate."""
    _diag_checked(A)
    x, b = _vectors(A, x, b)
    t = resolve_threads(threads)
    rows = np.arange(A.nrows, dtype=INDEX_DTYPE)
    out = np.empty_like(x)
    for _ in range(sweeps):
        run_chunked(K.jacobi_rows, rows, t, A.row_offsets, A.col_indices, A.values, x, out, b, float(omega))
        x, out = out, x
    return x


def _check_order(order, n):
    order = np.asarray(order)
    if order.shape != (n,) or not np.issubdtype(order.dtype, np.integer):
        raise InvalidPermutation("order must be a permutation of the rows")
    seen = np.zeros(n, dtype=bool)
    if n and (order.min() < 0 or order.max() >= n):
        raise InvalidPermutation("order entry out of range")
    seen[order] = True
    if not seen.all():
        raise InvalidPermutation("order must be a permutation of the rows")
    return np.ascontiguousarray(order, dtype=INDEX_DTYPE)


def gs_sweep_ordered(A: SparseMatrix, x, b, order=None, sweeps: int = 1) -> np.ndarray:
    """Sequential Gauss-Seidel visiting rows in ``order`` (natural order by default)."""
    _diag_checked(A)
    x, b = _vectors(A, x, b)
    order = np.arange(A.nrows, dtype=INDEX_DTYPE) if order is None else _check_order(order, A.nrows)
    for _ in range(sweeps):
        K.relax_rows(A.row_offsets, A.col_indices, A.values, x, b, order)
    return x


def _pgs_groups(A, x, b, groups, threads):
    for grp in groups:
        run_chunked(K.relax_rows, grp, threads, A.row_offsets, A.col_indices, A.values, x, b)


def pgs_mc_sweep(A: SparseMatrix, x, b, plan: ColoringPlan, sweeps: int = 1, threads=None,
                 check: bool = True) -> np.ndarray:
    """Multi-color Gauss-Seidel.

    Groups are visited in plan order with a barrier between them; the rows of
    one group are split across ``threads`` workers.  Because a valid plan
    never puts two coupled rows in one group, the iterate equals sequential
    Gauss-Seidel in ``plan.order()`` bit for bit, at any thread count.
    """
    _diag_checked(A)
    x, b = _vectors(A, x, b)
    if check:
        report = validate_plan(plan, build_adjacency(A))
        if not report.ok:
            raise InvalidPlanError(f"coloring plan invalid for this matrix: {report.message}")
    t = resolve_threads(threads)
    groups = [np.ascontiguousarray(g, dtype=INDEX_DTYPE) for g in plan.groups]
    for _ in range(sweeps):
        _pgs_groups(A, x, b, groups, t)
    return x


class PointSmoother:
    """A relaxation bound to one matrix, reused across V-cycles.

    ``smooth(x, b, reverse=True)`` visits rows (or groups) in reverse order,
    which makes pre- plus post-smoothing symmetric for Gauss-Seidel variants.
    """

    def __init__(self, A: SparseMatrix, config: SmootherConfig, threads=None):
        _diag_checked(A)
        self.A = A
        self.config = config
        self.threads = threads
        kind = config.kind
        plan = config.plan
        if kind in (SmootherKind.PGS_MC, SmootherKind.GS_COLOR):
            if plan is None:
                raise ValueError(f"{kind.value} smoother needs a coloring plan")
            if plan.n != A.nrows:
                raise InvalidPlanError("plan size does not match matrix")
        n = A.nrows
        if kind is SmootherKind.GS:
            self._order = np.arange(n, dtype=INDEX_DTYPE)
        elif kind is SmootherKind.GS_COLOR:
            self._order = plan.order()
        else:
            self._order = None
        if kind is SmootherKind.PGS_MC:
            self._groups = [np.ascontiguousarray(g, dtype=INDEX_DTYPE) for g in plan.groups]
            self._groups_rev = [g[::-1].copy() for g in reversed(self._groups)]
        if self._order is not None:
            self._order_rev = self._order[::-1].copy()
        self._rows = np.arange(n, dtype=INDEX_DTYPE)

    def smooth(self, x, b, sweeps: int | None = None, reverse: bool = False) -> np.ndarray:
        """Relax in place on ``x`` and return it."""
        A, cfg = self.A, self.config
        sweeps = cfg.sweeps if sweeps is None else sweeps
        t = resolve_threads(self.threads)
        args = (A.row_offsets, A.col_indices, A.values)
        if cfg.kind is SmootherKind.JACOBI:
            tmp = np.empty_like(x)
            for _ in range(sweeps):
                run_chunked(K.jacobi_rows, self._rows, t, *args, x, tmp, b, float(cfg.omega))
                x[:] = tmp
        elif cfg.kind is SmootherKind.PGS_MC:
            groups = self._groups_rev if reverse else self._groups
            for _ in range(sweeps):
                _pgs_groups(A, x, b, groups, t)
        else:
            order = self._order_rev if reverse else self._order
            for _ in range(sweeps):
                K.relax_rows(*args, x, b, order)
        return x


# block methods --------------------------------------------------------------------

def _interleaved(A: SparseMatrix, layout: BlockLayout):
    """Return the matrix in cell-interleaved order plus the permutation used (or None)."""
    if A.nrows != layout.n or A.ncols != layout.n:
        raise DimensionMismatch(f"matrix {A.shape} does not match layout with {layout.n} unknowns")
    if layout.ordering is Ordering.CELL_INTERLEAVED:
        return A, None
    perm = layout.to_interleaved()
    return permute(A, perm), perm


def _to_bsr(A: SparseMatrix, bs: int):
    m = sp.bsr_matrix(A.to_scipy(), blocksize=(bs, bs))
    m.sort_indices()
    indptr = m.indptr.astype(INDEX_DTYPE)
    indices = m.indices.astype(INDEX_DTYPE)
    blocks = np.ascontiguousarray(m.data, dtype=np.float64).copy()
    nb = indptr.size - 1
    diag_pos = np.full(nb, -1, dtype=INDEX_DTYPE)
    rows = np.repeat(np.arange(nb), np.diff(indptr))
    on_diag = np.flatnonzero(rows == indices)
    diag_pos[rows[on_diag]] = on_diag
    return indptr, indices, blocks, diag_pos


@dataclass(frozen=True, eq=False)
class BlockIluFactorization:
    """Zero-fill block ILU factors stored on the block pattern of the input."""

    layout: BlockLayout
    indptr: np.ndarray
    indices: np.ndarray
    blocks: np.ndarray
    diag_pos: np.ndarray
    perm: np.ndarray | None = None

    def apply(self, r) -> np.ndarray:
        return bilu0_apply(self, r)


def bilu0_setup(A: SparseMatrix, layout: BlockLayout) -> BlockIluFactorization:
    Ai, perm = _interleaved(A, layout)
    bs = layout.block_size
    indptr, indices, blocks, diag_pos = _to_bsr(Ai, bs)
    bad = K.bilu0_factor(indptr, indices, blocks, diag_pos)
    if bad >= 0:
        raise SingularMatrixError(f"singular pivot block in cell {bad}", index=int(bad), stage="bilu")
    return BlockIluFactorization(layout, indptr, indices, blocks, diag_pos, perm)


def bilu0_apply(F: BlockIluFactorization, r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (F.layout.n,):
        raise DimensionMismatch("residual does not match factorization size")
    bs = F.layout.block_size
    rr = r if F.perm is None else r[F.perm]
    rr = np.ascontiguousarray(rr).reshape(-1, bs)
    x = np.empty_like(rr)
    K.bilu0_solve(F.indptr, F.indices, F.blocks, F.diag_pos, rr, x)
    x = x.reshape(-1)
    if F.perm is None:
        return x
    out = np.empty_like(x)
    out[F.perm] = x
    return out


@dataclass(frozen=True, eq=False)
class BlockGsState:
    layout: BlockLayout
    indptr: np.ndarray
    indices: np.ndarray
    blocks: np.ndarray
    dinv: np.ndarray
    sweeps: int = 1
    perm: np.ndarray | None = None

    def apply(self, r) -> np.ndarray:
        return bgs_apply(self, r)


def bgs_setup(A_NN: SparseMatrix, layout: BlockLayout, sweeps: int = 1) -> BlockGsState:
    """Invert the diagonal blocks of ``A_NN`` for block Gauss-Seidel."""
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    Ai, perm = _interleaved(A_NN, layout)
    indptr, indices, blocks, diag_pos = _to_bsr(Ai, layout.block_size)
    dinv = np.empty((layout.ncells, layout.block_size, layout.block_size))
    bad = K.invert_diagonal_blocks(blocks, diag_pos, dinv)
    if bad >= 0:
        raise SingularMatrixError(f"singular diagonal block in cell {bad}", index=int(bad), stage="bgs")
    return BlockGsState(layout, indptr, indices, blocks, dinv, sweeps, perm)


def bgs_apply(S: BlockGsState, r) -> np.ndarray:
    """``S.sweeps`` forward block Gauss-Seidel sweeps from a zero guess."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (S.layout.n,):
        raise DimensionMismatch("residual does not match block size")
    bs = S.layout.block_size
    rr = r if S.perm is None else r[S.perm]
    rr = np.ascontiguousarray(rr).reshape(-1, bs)
    x = np.zeros_like(rr)
    for _ in range(S.sweeps):
        K.block_gs_sweep(S.indptr, S.indices, S.blocks, S.dinv, rr, x)
    x = x.reshape(-1)
    if S.perm is None:
        return x
    return x[inverse_permutation(S.perm)]
