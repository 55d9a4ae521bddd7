"""Unsmoothed aggregation AMG with pairwise matching.

Aggregates are pairs (or singletons) chosen greedily; prolongation is the
piecewise-constant 0/1 matrix of the aggregation, and coarse operators are
Galerkin products ``P^T A P``.  The cycle is a V-cycle with a dense LU solve
on the coarsest level.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .coloring import ColoringPlan, color_matrix
from .errors import DimensionMismatch
from .smoothers import PointSmoother, SmootherConfig, SmootherKind
from .sparse import INDEX_DTYPE, DenseFactorization, SparseMatrix, dense_factorize


@dataclass(frozen=True, eq=False)
class AggregationMap:
    n_fine: int
    n_coarse: int
    aggregate_of: np.ndarray

    def prolongator(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (np.ones(self.n_fine), (np.arange(self.n_fine), self.aggregate_of)),
            shape=(self.n_fine, self.n_coarse),
        )

    def aggregates(self) -> list[np.ndarray]:
        order = np.argsort(self.aggregate_of, kind="stable")
        bounds = np.searchsorted(self.aggregate_of[order], np.arange(self.n_coarse + 1))
        return [order[bounds[k]:bounds[k + 1]] for k in range(self.n_coarse)]

    def restrict(self, r: np.ndarray) -> np.ndarray:
        return np.bincount(self.aggregate_of, weights=r, minlength=self.n_coarse)

    def prolong(self, e: np.ndarray) -> np.ndarray:
        return e[self.aggregate_of]

    def compose(self, coarser: "AggregationMap") -> "AggregationMap":
        return AggregationMap(self.n_fine, coarser.n_coarse, coarser.aggregate_of[self.aggregate_of])


def pairwise_aggregate(A: SparseMatrix) -> AggregationMap:
    """One greedy pairwise matching pass.

    The unaggregated row with the fewest unaggregated neighbors is matched
    with its strongest unaggregated neighbor, where the coupling strength of
    ``(i, j)`` is ``-(a_ij + a_ji) / 2``.  Only negative couplings are
    candidates when the row has any; otherwise the largest ``|a_ij + a_ji|``
    wins.  Ties go to the lowest index; rows with no candidate stay single.
    """
    if A.nrows != A.ncols:
        raise DimensionMismatch("aggregation needs a square matrix")
    n = A.nrows
    M = A.to_scipy()
    S = ((M + M.T) * 0.5).tocsr()
    S.setdiag(0)
    S.eliminate_zeros()
    S.sort_indices()
    ptr, idx, val = S.indptr, S.indices, S.data

    agg = np.full(n, -1, dtype=INDEX_DTYPE)
    free_deg = np.diff(ptr).astype(INDEX_DTYPE)
    span = n + 1
    heap = [int(free_deg[i]) * span + i for i in range(n)]
    heapq.heapify(heap)
    nc = 0
    while heap:
        key = heapq.heappop(heap)
        i, d = key % span, key // span
        if agg[i] >= 0 or d != free_deg[i]:
            continue
        cols = idx[ptr[i]:ptr[i + 1]]
        vals = val[ptr[i]:ptr[i + 1]]
        free = agg[cols] < 0
        cols, vals = cols[free], vals[free]
        j = -1
        if cols.size:
            neg = vals < 0
            if neg.any():
                strength = np.where(neg, -vals, -np.inf)
            else:
                strength = np.abs(vals)
            # argmax returns the first maximum, i.e. the lowest column index
            j = int(cols[int(np.argmax(strength))])
        members = [i] if j < 0 else [i, j]
        for v in members:
            agg[v] = nc
        nc += 1
        for v in members:
            nb = idx[ptr[v]:ptr[v + 1]]
            for u in nb[agg[nb] < 0].tolist():
                free_deg[u] -= 1
                heapq.heappush(heap, int(free_deg[u]) * span + u)
    return AggregationMap(n, nc, agg)


def double_pairwise_aggregate(A: SparseMatrix) -> AggregationMap:
    """Two pairwise passes; aggregates of up to four rows."""
    first = pairwise_aggregate(A)
    second = pairwise_aggregate(galerkin_coarsen(A, first))
    return first.compose(second)


def galerkin_coarsen(A: SparseMatrix, agg: AggregationMap) -> SparseMatrix:
    """``P^T A P`` for the piecewise-constant prolongation of ``agg``."""
    if agg.n_fine != A.nrows:
        raise DimensionMismatch("aggregation does not match matrix")
    P = agg.prolongator()
    return SparseMatrix.from_scipy((P.T @ A.to_scipy() @ P).tocsr())


@dataclass(frozen=True)
class AmgParams:
    coarsest_max_dof: int = 100
    max_levels: int = 20
    pre_sweeps: int = 1
    post_sweeps: int = 1
    smoother: SmootherKind = SmootherKind.PGS_MC
    jacobi_omega: float = 1.0
    double_pairwise: bool = False
    mirror_post: bool = True
    min_reduction: float = 0.1
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "smoother", SmootherKind(self.smoother))
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")


@dataclass(eq=False)
class AmgLevel:
    A: SparseMatrix
    smoother: PointSmoother | None = None
    plan: ColoringPlan | None = None
    aggregation: AggregationMap | None = None
    pre_sweeps: int = 1
    post_sweeps: int = 1


@dataclass(eq=False)
class AmgHierarchy:
    levels: list[AmgLevel]
    coarsest: DenseFactorization
    coarsest_max_dof: int
    params: AmgParams = field(default_factory=AmgParams)

    @property
    def n(self) -> int:
        return self.levels[0].A.nrows

    def vcycle(self, r) -> np.ndarray:
        return amg_vcycle(self, r)

    __call__ = vcycle

    def summary(self) -> dict:
        rows = []
        for k, lvl in enumerate(self.levels):
            rows.append({
                "level": k,
                "size": lvl.A.nrows,
                "nnz": lvl.A.nnz,
                "groups": lvl.plan.num_groups if lvl.plan is not None else None,
                "coarsest": lvl.aggregation is None,
            })
        return {
            "num_levels": len(self.levels),
            "coarsest_max_dof": self.coarsest_max_dof,
            "smoother": self.params.smoother.value,
            "levels": rows,
        }

    def summary_text(self) -> str:
        lines = [f"{'level':>5} {'size':>8} {'nnz':>10} {'groups':>6}"]
        for row in self.summary()["levels"]:
            g = "-" if row["groups"] is None else str(row["groups"])
            lines.append(f"{row['level']:>5} {row['size']:>8} {row['nnz']:>10} {g:>6}")
        return "\n".join(lines)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            if str(path).endswith(".json"):
                json.dump(self.summary(), fh, indent=2)
            else:
                fh.write(self.summary_text() + "\n")


def _make_smoother(A: SparseMatrix, params: AmgParams):
    kind = params.smoother
    plan = color_matrix(A) if kind in (SmootherKind.PGS_MC, SmootherKind.GS_COLOR) else None
    cfg = SmootherConfig(kind, sweeps=1, plan=plan, omega=params.jacobi_omega)
    return PointSmoother(A, cfg, threads=params.threads), plan


def amg_setup(A: SparseMatrix, params: AmgParams | None = None) -> AmgHierarchy:
    """Coarsen until the level is small enough, coarsening stalls, or ``max_levels`` is hit."""
    params = params or AmgParams()
    if A.nrows != A.ncols:
        raise DimensionMismatch("AMG needs a square matrix")
    levels: list[AmgLevel] = []
    current = A
    while True:
        n = current.nrows
        if n <= params.coarsest_max_dof or len(levels) + 1 >= params.max_levels:
            break
        agg = double_pairwise_aggregate(current) if params.double_pairwise else pairwise_aggregate(current)
        if agg.n_coarse > (1.0 - params.min_reduction) * n:
            break
        smoother, plan = _make_smoother(current, params)
        levels.append(AmgLevel(current, smoother, plan, agg, params.pre_sweeps, params.post_sweeps))
        current = galerkin_coarsen(current, agg)
    coarsest = dense_factorize(current)
    levels.append(AmgLevel(current))
    return AmgHierarchy(levels, coarsest, params.coarsest_max_dof, params)


def amg_vcycle(H: AmgHierarchy, r) -> np.ndarray:
    """One V-cycle from a zero initial guess; linear in ``r``."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (H.n,):
        raise DimensionMismatch("residual does not match finest level")
    return _cycle(H, 0, r)


def _cycle(H: AmgHierarchy, k: int, r: np.ndarray) -> np.ndarray:
    lvl = H.levels[k]
    if lvl.aggregation is None:
        return H.coarsest.solve(r)
    x = np.zeros_like(r)
    if lvl.pre_sweeps:
        lvl.smoother.smooth(x, r, sweeps=lvl.pre_sweeps)
    res = r - lvl.A @ x
    e = _cycle(H, k + 1, lvl.aggregation.restrict(res))
    x += lvl.aggregation.prolong(e)
    if lvl.post_sweeps:
        lvl.smoother.smooth(x, r, sweeps=lvl.post_sweeps, reverse=H.params.mirror_post)
    return x
