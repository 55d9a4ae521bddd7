"""Adjacency graphs and greedy vertex grouping for multi-color Gauss-Seidel.

The grouping splits the vertex set into independent subsets: no two vertices
in one group share an edge, so all rows of a group can be relaxed at once.
Each split grows an independent set outward from a maximum-degree vertex,
preferring the vertices two steps away from what was already accepted.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch
from .sparse import INDEX_DTYPE, SparseMatrix


@dataclass(frozen=True, eq=False)
class AdjacencyGraph:
    """Symmetric, loop-free graph stored as CSR neighbor lists."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    def to_scipy(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.int8)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def edges(self) -> set[tuple[int, int]]:
        """Undirected edges as ``(i, j)`` with ``i < j``."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        keep = rows < self.indices
        return set(zip(rows[keep].tolist(), self.indices[keep].tolist()))

    @classmethod
    def from_edges(cls, n: int, edges) -> "AdjacencyGraph":
        edges = np.asarray(list(edges), dtype=INDEX_DTYPE).reshape(-1, 2)
        m = sp.coo_matrix(
            (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n)
        ).tocsr()
        return _graph_from_pattern(m)


def _graph_from_pattern(m: sp.spmatrix) -> AdjacencyGraph:
    m = sp.csr_matrix(m, dtype=np.float64)
    m.data = (m.data != 0).astype(np.float64)
    m = (m + m.T).tocsr()
    m.setdiag(0)
    m.eliminate_zeros()
    m.sort_indices()
    return AdjacencyGraph(
        m.shape[0],
        m.indptr.astype(INDEX_DTYPE),
        m.indices.astype(INDEX_DTYPE),
    )


def build_adjacency(A: SparseMatrix) -> AdjacencyGraph:
    """Edge ``(i, j)`` iff ``i != j`` and ``a_ij`` or ``a_ji`` is nonzero."""
    if A.nrows != A.ncols:
        raise DimensionMismatch("adjacency needs a square matrix")
    return _graph_from_pattern(A.to_scipy())


def _second_circle(G: AdjacencyGraph) -> sp.csr_matrix:
    """Vertices at distance exactly two, as a boolean CSR pattern."""
    S = G.to_scipy().astype(np.int32)
    S2 = (S @ S).tocsr()
    S2.setdiag(0)
    S2 = S2 - S2.multiply(S)
    S2.eliminate_zeros()
    S2.sort_indices()
    return S2


@dataclass
class SplitState:
    """Working sets of one splitting pass.

    ``selected`` (W) is independent, ``deferred`` (W-bar) is left for later
    groups and ``frontier`` (W-hat) holds undetermined second-circle vertices.
    """

    selected: list = field(default_factory=list)
    deferred: list = field(default_factory=list)
    frontier: set = field(default_factory=set)


def vertices_splitting(V, G: AdjacencyGraph, *, _second=None, _degrees=None) -> tuple[list[int], list[int]]:
    """Split ``V`` into an independent set and the vertices deferred to later groups.

    Candidates come from the frontier when it is nonempty, otherwise from all
    of ``V``; the candidate of largest full-graph degree wins, lowest index on
    ties.  Returns ``(W, W_bar)`` as sorted lists.
    """
    n = G.n
    degrees = G.degrees if _degrees is None else _degrees
    second = _second_circle(G) if _second is None else _second
    indptr, indices = G.indptr, G.indices
    s_ptr, s_idx = second.indptr, second.indices

    V = np.unique(np.asarray(list(V) if not isinstance(V, np.ndarray) else V, dtype=INDEX_DTYPE))
    state = SplitState()
    if V.size == 0:
        return [], []

    undetermined = np.zeros(n, dtype=bool)
    undetermined[V] = True
    in_selected = np.zeros(n, dtype=bool)
    in_frontier = np.zeros(n, dtype=bool)
    remaining = V.size

    # isolated vertices can never conflict with anything
    iso = V[degrees[V] == 0]
    if iso.size:
        state.selected.extend(iso.tolist())
        in_selected[iso] = True
        undetermined[iso] = False
        remaining -= iso.size

    # heap keys order by degree descending, then index ascending
    span = n + 1
    top = int(degrees.max(initial=0))
    pool = [(top - int(degrees[v])) * span + int(v) for v in V[degrees[V] > 0]]
    heapq.heapify(pool)
    frontier: list[int] = []

    while remaining:
        vi = -1
        while frontier:
            v = heapq.heappop(frontier) % span
            in_frontier[v] = False
            state.frontier.discard(v)
            if undetermined[v]:
                vi = v
                break
        if vi < 0:
            while pool:
                v = heapq.heappop(pool) % span
                if undetermined[v]:
                    vi = v
                    break
        if vi < 0:
            break

        nbrs = indices[indptr[vi]:indptr[vi + 1]]
        undetermined[vi] = False
        remaining -= 1
        if not in_selected[nbrs].any():
            in_selected[vi] = True
            state.selected.append(vi)
            fresh = nbrs[undetermined[nbrs]]
            undetermined[fresh] = False
            remaining -= fresh.size
            state.deferred.extend(fresh.tolist())
            ring = s_idx[s_ptr[vi]:s_ptr[vi + 1]]
            ring = ring[undetermined[ring] & ~in_frontier[ring]]
            in_frontier[ring] = True
            for v in ring.tolist():
                heapq.heappush(frontier, (top - int(degrees[v])) * span + v)
                state.frontier.add(v)
        else:
            state.deferred.append(vi)

    return sorted(state.selected), sorted(state.deferred)


@dataclass(frozen=True, eq=False)
class ColoringPlan:
    n: int
    groups: tuple[np.ndarray, ...]

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @property
    def group_of(self) -> np.ndarray:
        g = np.full(self.n, -1, dtype=INDEX_DTYPE)
        for k, grp in enumerate(self.groups):
            g[grp] = k
        return g

    def order(self) -> np.ndarray:
        """Concatenation of the groups; the equivalent sequential visiting order."""
        if not self.groups:
            return np.empty(0, dtype=INDEX_DTYPE)
        return np.concatenate(self.groups).astype(INDEX_DTYPE)

    @classmethod
    def from_groups(cls, n: int, groups) -> "ColoringPlan":
        return cls(n, tuple(np.asarray(g, dtype=INDEX_DTYPE) for g in groups))

    @classmethod
    def from_labels(cls, labels) -> "ColoringPlan":
        labels = np.asarray(labels)
        g = int(labels.max()) + 1 if labels.size else 0
        return cls.from_groups(labels.size, [np.flatnonzero(labels == k) for k in range(g)])


def vertices_grouping(G: AdjacencyGraph) -> ColoringPlan:
    """Repeatedly split the deferred vertices until none remain."""
    second = _second_circle(G)
    degrees = G.degrees
    V = np.arange(G.n, dtype=INDEX_DTYPE)
    groups = []
    while V.size:
        W, W_bar = vertices_splitting(V, G, _second=second, _degrees=degrees)
        groups.append(np.asarray(W, dtype=INDEX_DTYPE))
        V = np.asarray(W_bar, dtype=INDEX_DTYPE)
    return ColoringPlan(G.n, tuple(groups))


def color_matrix(A: SparseMatrix) -> ColoringPlan:
    return vertices_grouping(build_adjacency(A))


@dataclass
class PlanReport:
    partition: bool
    disjoint: bool
    independent: bool
    violation: tuple[int, int] | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.partition and self.disjoint and self.independent

    def __bool__(self):
        return self.ok


def validate_plan(plan: ColoringPlan, G: AdjacencyGraph) -> PlanReport:
    """Check the plan covers every vertex once and each group is independent.

    On failure ``violation`` holds the first offending pair: a vertex listed
    twice as ``(v, v)``, a missing vertex as ``(v, -1)``, or an edge inside a
    group as ``(i, j)``.
    """
    if plan.n != G.n:
        return PlanReport(False, False, False, None, f"plan covers {plan.n} vertices, graph has {G.n}")
    count = np.zeros(G.n, dtype=INDEX_DTYPE)
    in_range = True
    for grp in plan.groups:
        grp = np.asarray(grp)
        if grp.size and (grp.min() < 0 or grp.max() >= G.n):
            in_range = False
            continue
        np.add.at(count, grp, 1)
    disjoint = bool((count <= 1).all())
    partition = in_range and bool((count >= 1).all())
    violation = None
    msgs = []
    if not disjoint:
        v = int(np.flatnonzero(count > 1)[0])
        violation = (v, v)
        msgs.append(f"vertex {v} appears in more than one group")
    if not partition:
        missing = np.flatnonzero(count == 0)
        if violation is None:
            violation = (int(missing[0]), -1) if missing.size else None
        msgs.append("groups do not cover every vertex" if in_range else "vertex id out of range")

    independent = True
    mark = np.zeros(G.n, dtype=bool)
    for grp in plan.groups:
        grp = np.asarray(grp)
        grp = grp[(grp >= 0) & (grp < G.n)]
        mark[grp] = True
        for i in grp.tolist():
            nb = G.neighbors(i)
            hit = nb[mark[nb]]
            if hit.size:
                independent = False
                if violation is None:
                    violation = (i, int(hit[0]))
                msgs.append(f"adjacent vertices {i} and {int(hit[0])} share a group")
                break
        mark[grp] = False
        if not independent:
            break
    return PlanReport(partition, disjoint, independent, violation, "; ".join(msgs))


def write_plan(plan: ColoringPlan, path) -> None:
    """One ``vertex_id group_id`` line per vertex."""
    labels = plan.group_of
    with open(path, "w") as fh:
        for v, g in enumerate(labels.tolist()):
            fh.write(f"{v} {g}\n")


def read_plan(path) -> ColoringPlan:
    pairs = [tuple(int(t) for t in line.split()) for line in Path(path).read_text().splitlines() if line.strip()]
    labels = np.full(len(pairs), -1, dtype=INDEX_DTYPE)
    for v, g in pairs:
        labels[v] = g
    return ColoringPlan.from_labels(labels)
