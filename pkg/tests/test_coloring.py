import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from asmsp import SparseMatrix, poisson2d, poisson3d
from asmsp.coloring import (
    AdjacencyGraph,
    ColoringPlan,
    build_adjacency,
    color_matrix,
    read_plan,
    validate_plan,
    vertices_grouping,
    vertices_splitting,
    write_plan,
)
from asmsp.errors import DimensionMismatch
from asmsp.sparse import transpose_pattern

from conftest import brute_force_independent, random_sparse


def path_graph(n):
    return AdjacencyGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n):
    return AdjacencyGraph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def literal_split(V, G):
    """Set-based transcription of the splitting loop, quadratic but obvious."""
    adj = [set(G.neighbors(i).tolist()) for i in range(G.n)]
    deg = [len(a) for a in adj]
    W, W_bar, frontier = [], [], set()
    U = set(int(v) for v in V)
    while U:
        cand = (frontier & U) or U
        vi = min(cand, key=lambda v: (-deg[v], v))
        U.discard(vi)
        if adj[vi] & set(W):
            W_bar.append(vi)
            continue
        W.append(vi)
        s_bar = adj[vi] & U
        W_bar.extend(s_bar)
        U -= s_bar
        ring = set().union(*(adj[j] for j in adj[vi])) - adj[vi] - {vi} if adj[vi] else set()
        frontier |= ring & U
    return sorted(W), sorted(W_bar)


def literal_grouping(G):
    V, groups = list(range(G.n)), []
    while V:
        W, V = literal_split(V, G)
        groups.append(W)
    return groups


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    keep = rng.random(iu[0].size) < p
    return AdjacencyGraph.from_edges(n, zip(iu[0][keep].tolist(), iu[1][keep].tolist()))


# adjacency ---------------------------------------------------------------------------

def test_adjacency_of_diagonal_has_no_edges():
    G = build_adjacency(SparseMatrix.from_dense(np.diag([1.0, 2.0, 3.0])))
    assert G.edges() == set()
    np.testing.assert_array_equal(G.degrees, [0, 0, 0])


def test_adjacency_of_tridiagonal():
    A = SparseMatrix.from_dense([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    G = build_adjacency(A)
    assert G.edges() == {(0, 1), (1, 2)}
    np.testing.assert_array_equal(G.degrees, [1, 2, 1])


def test_adjacency_symmetrizes_one_sided_coupling():
    a = np.eye(3)
    a[0, 2] = 0.5
    G = build_adjacency(SparseMatrix.from_dense(a))
    assert 2 in G.neighbors(0) and 0 in G.neighbors(2)


@given(st.integers(2, 40), st.floats(0.02, 0.4), st.integers(0, 10_000))
def test_adjacency_matches_dense_pattern_oracle(n, density, seed):
    A = random_sparse(n, density, seed)
    d = A.toarray()
    ref = ((d != 0) | (d.T != 0)) & ~np.eye(n, dtype=bool)
    got = np.zeros((n, n), dtype=bool)
    G = build_adjacency(A)
    for i in range(n):
        got[i, G.neighbors(i)] = True
    np.testing.assert_array_equal(got, ref)
    assert G.edges() == build_adjacency(transpose_pattern(A)).edges()


def test_adjacency_rejects_rectangular():
    with pytest.raises(DimensionMismatch):
        build_adjacency(SparseMatrix.from_scipy(sp.csr_matrix(np.ones((2, 3)))))


# splitting ---------------------------------------------------------------------------

def test_split_path_graph_picks_middle():
    assert vertices_splitting([0, 1, 2], path_graph(3)) == ([1], [0, 2])


def test_split_edgeless_accepts_everything():
    assert vertices_splitting(range(4), AdjacencyGraph.from_edges(4, [])) == ([0, 1, 2, 3], [])


def test_split_complete_graph():
    W, W_bar = vertices_splitting(range(3), complete_graph(3))
    assert len(W) == 1 and sorted(W + W_bar) == [0, 1, 2]


def test_split_empty_set():
    assert vertices_splitting([], path_graph(3)) == ([], [])


def test_split_prefers_second_circle():
    # path 0-1-2-3-4-5: picks 1 (degree 2, lowest index), then must take 3 from
    # the second circle before 4, then 5 is blocked by nothing -> accepted
    W, W_bar = vertices_splitting(range(6), path_graph(6))
    assert (W, W_bar) == ([1, 3, 5], [0, 2, 4])


@given(st.integers(1, 35), st.floats(0.0, 0.5), st.integers(0, 10_000))
def test_split_matches_literal_transcription(n, p, seed):
    G = random_graph(n, p, seed)
    rng = np.random.default_rng(seed)
    V = sorted(rng.choice(n, size=rng.integers(1, n + 1), replace=False).tolist())
    W, W_bar = vertices_splitting(V, G)
    assert (W, W_bar) == literal_split(V, G)
    assert sorted(W + W_bar) == V


# grouping ----------------------------------------------------------------------------

def test_grouping_diagonal_single_group():
    plan = color_matrix(SparseMatrix.identity(5))
    assert plan.num_groups == 1
    np.testing.assert_array_equal(plan.groups[0], np.arange(5))


def test_grouping_path():
    plan = vertices_grouping(path_graph(3))
    assert [g.tolist() for g in plan.groups] == [[1], [0, 2]]


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_grouping_complete_graph_singletons(n):
    plan = vertices_grouping(complete_graph(n))
    assert plan.num_groups == n
    assert all(g.size == 1 for g in plan.groups)


def test_grouping_laplacian_8x8_is_checkerboard():
    plan = color_matrix(poisson2d(8, 8))
    assert plan.num_groups == 2
    parity = np.add.outer(np.arange(8), np.arange(8)).ravel() % 2  # (j + i) for index i + 8 j
    for g in plan.groups:
        assert np.unique(parity[g]).size == 1
    assert brute_force_independent(poisson2d(8, 8).toarray(), plan.groups)


@given(st.integers(1, 30), st.floats(0.0, 0.5), st.integers(0, 10_000))
def test_grouping_matches_literal_and_is_valid(n, p, seed):
    G = random_graph(n, p, seed)
    plan = vertices_grouping(G)
    assert [g.tolist() for g in plan.groups] == literal_grouping(G)
    assert validate_plan(plan, G).ok
    assert plan.num_groups <= G.max_degree + 1


def test_grouping_is_deterministic():
    A = random_sparse(200, 0.03, seed=11)
    a, b = color_matrix(A), color_matrix(A)
    assert [g.tolist() for g in a.groups] == [g.tolist() for g in b.groups]


def test_grouping_7_point_laplacian():
    A = poisson3d(5, 4, 3)
    plan = color_matrix(A)
    assert validate_plan(plan, build_adjacency(A)).ok
    assert plan.num_groups == 2


# validation --------------------------------------------------------------------------

def test_validate_detects_adjacent_pair():
    G = path_graph(3)
    rep = validate_plan(ColoringPlan.from_groups(3, [[0, 1], [2]]), G)
    assert not rep.ok and not rep.independent
    assert set(rep.violation) == {0, 1}


def test_validate_detects_missing_and_duplicate():
    G = path_graph(3)
    missing = validate_plan(ColoringPlan.from_groups(3, [[0, 2]]), G)
    assert not missing.partition and missing.violation == (1, -1)
    dup = validate_plan(ColoringPlan.from_groups(3, [[0, 2], [1, 2]]), G)
    assert not dup.disjoint and dup.violation == (2, 2)


@given(st.integers(2, 25), st.floats(0.05, 0.5), st.integers(1, 6), st.integers(0, 10_000))
def test_validate_agrees_with_brute_force(n, p, k, seed):
    G = random_graph(n, p, seed)
    labels = np.random.default_rng(seed).integers(0, k, n)
    plan = ColoringPlan.from_labels(labels)
    dense = np.zeros((n, n))
    for i, j in G.edges():
        dense[i, j] = dense[j, i] = 1.0
    groups = [g for g in plan.groups if g.size]
    assert validate_plan(ColoringPlan(n, tuple(groups)), G).ok == brute_force_independent(dense, groups)


def test_plan_file_round_trip(tmp_path):
    plan = color_matrix(poisson2d(5, 4))
    write_plan(plan, tmp_path / "plan.txt")
    first = (tmp_path / "plan.txt").read_text().splitlines()[0].split()
    assert first == ["0", str(plan.group_of[0])]
    back = read_plan(tmp_path / "plan.txt")
    np.testing.assert_array_equal(back.group_of, plan.group_of)
