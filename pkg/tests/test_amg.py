import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from asmsp import SparseMatrix, gmres_solve, poisson2d
from asmsp.amg import (
    AggregationMap,
    AmgParams,
    amg_setup,
    amg_vcycle,
    double_pairwise_aggregate,
    galerkin_coarsen,
    pairwise_aggregate,
)
from asmsp.krylov import GmresConfig

from conftest import dense_operator, random_sparse


def poisson1d(n):
    return SparseMatrix.from_scipy(sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], (n, n)).tocsr())


# aggregation ----------------------------------------------------------------------------

def test_pairwise_1d_poisson_4():
    agg = pairwise_aggregate(poisson1d(4))
    assert agg.n_coarse == 2
    assert [a.tolist() for a in agg.aggregates()] == [[0, 1], [2, 3]]


def test_pairwise_diagonal_all_singletons():
    agg = pairwise_aggregate(SparseMatrix.from_dense(np.diag([1.0, 2.0, 3.0])))
    assert agg.n_coarse == 3
    assert all(a.size == 1 for a in agg.aggregates())


def test_pairwise_prefers_negative_coupling():
    # all rows have two neighbors, so row 0 goes first; the -1 coupling wins over +5
    A = SparseMatrix.from_dense([[4.0, 5.0, -1.0], [5.0, 4.0, 1.0], [-1.0, 1.0, 4.0]])
    agg = pairwise_aggregate(A)
    assert [a.tolist() for a in agg.aggregates()] == [[0, 2], [1]]


def test_pairwise_falls_back_to_largest_positive_coupling():
    A = SparseMatrix.from_dense([[4.0, 3.0, -1.0], [3.0, 4.0, 0.0], [-1.0, 0.0, 4.0]])
    # rows 1 and 2 each have one free neighbor; row 1 goes first (lowest index)
    # and its only candidate has a positive coupling, so it pairs with 0 by |a|
    agg = pairwise_aggregate(A)
    assert [a.tolist() for a in agg.aggregates()] == [[0, 1], [2]]


@given(st.integers(1, 80), st.floats(0.01, 0.3), st.integers(0, 10_000))
def test_pairwise_is_partition_into_small_aggregates(n, density, seed):
    A = random_sparse(n, density, seed, diag_shift=1.0)
    agg = pairwise_aggregate(A)
    sizes = np.bincount(agg.aggregate_of, minlength=agg.n_coarse)
    assert agg.aggregate_of.min() >= 0 and agg.aggregate_of.max() < agg.n_coarse
    assert sizes.min() >= 1 and sizes.max() <= 2
    # a pair is always coupled in the symmetrized pattern
    d = A.toarray()
    for a in agg.aggregates():
        if a.size == 2:
            i, j = a
            assert d[i, j] + d[j, i] != 0


def test_double_pairwise_aggregates_up_to_four():
    agg = double_pairwise_aggregate(poisson2d(8, 8))
    sizes = np.bincount(agg.aggregate_of)
    assert sizes.max() <= 4 and agg.n_coarse < 64 // 2


# Galerkin ------------------------------------------------------------------------------

def test_galerkin_identity_map():
    A = random_sparse(10, 0.3, seed=1)
    Ac = galerkin_coarsen(A, AggregationMap(10, 10, np.arange(10)))
    np.testing.assert_array_equal(Ac.toarray(), A.toarray())


def test_galerkin_1d_poisson():
    A = poisson1d(4)
    Ac = galerkin_coarsen(A, pairwise_aggregate(A))
    np.testing.assert_array_equal(Ac.toarray(), [[2.0, -1.0], [-1.0, 2.0]])


@given(st.integers(2, 50), st.integers(0, 10_000))
def test_galerkin_matches_dense_triple_product(n, seed):
    A = random_sparse(n, 0.2, seed, diag_shift=1.0)
    agg = pairwise_aggregate(A)
    P = np.zeros((n, agg.n_coarse))
    P[np.arange(n), agg.aggregate_of] = 1.0
    ref = P.T @ A.toarray() @ P
    got = galerkin_coarsen(A, agg).toarray()
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-13 * max(1.0, np.abs(ref).max()))
    rowsum = A.toarray().sum(axis=1)
    np.testing.assert_allclose(got.sum(axis=1), np.bincount(agg.aggregate_of, rowsum), atol=1e-12)


def test_restrict_and_prolong_are_transposes():
    agg = pairwise_aggregate(poisson2d(5, 5))
    P = agg.prolongator().toarray()
    r = np.arange(25.0)
    e = np.arange(agg.n_coarse, dtype=float)
    np.testing.assert_array_equal(agg.restrict(r), P.T @ r)
    np.testing.assert_array_equal(agg.prolong(e), P @ e)


# setup ----------------------------------------------------------------------------------

def test_small_matrix_is_direct_only():
    A = poisson2d(5, 5)
    H = amg_setup(A)
    assert len(H.levels) == 1
    r = np.ones(25)
    np.testing.assert_allclose(A.toarray() @ amg_vcycle(H, r), r, atol=1e-12)


def test_1d_poisson_level_sizes():
    H = amg_setup(poisson1d(16), AmgParams(coarsest_max_dof=4))
    assert [lvl.A.nrows for lvl in H.levels] == [16, 8, 4]


@pytest.mark.parametrize("max_levels", [1, 2, 3])
def test_level_count_bounded(max_levels):
    H = amg_setup(poisson2d(16, 16), AmgParams(coarsest_max_dof=2, max_levels=max_levels))
    assert len(H.levels) <= max_levels


def test_stall_guard_stops_coarsening():
    # a diagonal matrix cannot be coarsened at all
    H = amg_setup(SparseMatrix.from_dense(np.diag(np.arange(1.0, 201.0))))
    assert len(H.levels) == 1


def test_hierarchy_sizes_decrease_and_each_level_is_colored():
    H = amg_setup(poisson2d(32, 32))
    sizes = [lvl.A.nrows for lvl in H.levels]
    assert all(a > b for a, b in zip(sizes, sizes[1:]))
    assert sizes[-1] <= H.coarsest_max_dof
    assert all(lvl.plan is not None for lvl in H.levels[:-1])


def test_hierarchy_dump_text_and_json(tmp_path):
    H = amg_setup(poisson2d(16, 16))
    H.dump(tmp_path / "h.json")
    H.dump(tmp_path / "h.txt")
    info = json.loads((tmp_path / "h.json").read_text())
    assert [row["size"] for row in info["levels"]] == [lvl.A.nrows for lvl in H.levels]
    assert info["levels"][0]["groups"] == 2
    assert (tmp_path / "h.txt").read_text().splitlines()[1].split()[:2] == ["0", "256"]


# cycle ---------------------------------------------------------------------------------

def test_vcycle_is_linear():
    A = poisson2d(20, 20)
    H = amg_setup(A)
    rng = np.random.default_rng(2)
    r1, r2 = rng.standard_normal((2, A.nrows))
    lhs = H.vcycle(2.5 * r1 - 0.5 * r2)
    rhs = 2.5 * H.vcycle(r1) - 0.5 * H.vcycle(r2)
    assert np.linalg.norm(lhs - rhs) <= 1e-13 * np.linalg.norm(rhs)


def test_vcycle_thread_count_independent():
    A = poisson2d(24, 24)
    r = np.sin(np.arange(A.nrows))
    one = amg_setup(A, AmgParams(threads=1)).vcycle(r)
    eight = amg_setup(A, AmgParams(threads=8)).vcycle(r)
    assert np.array_equal(one, eight)


def test_vcycle_spectral_radius_below_one_poisson_16():
    A = poisson2d(16, 16)
    H = amg_setup(A, AmgParams(coarsest_max_dof=10))
    n = A.nrows
    E = np.eye(n) - dense_operator(H.vcycle, n) @ A.toarray()
    # power iteration with the dense eigen-solver as the cross-check
    v = np.random.default_rng(0).standard_normal(n)
    for _ in range(300):
        v = E @ v
        v /= np.linalg.norm(v)
    rho_power = np.linalg.norm(E @ v)
    rho = np.abs(np.linalg.eigvals(E)).max()
    assert rho < 1.0
    assert abs(rho_power - rho) < 1e-2


def _stationary_factors(A, H, cycles=10):
    rng = np.random.default_rng(0)
    xs = rng.standard_normal(A.nrows)
    b = A @ xs
    x, prev, out = np.zeros(A.nrows), np.linalg.norm(xs), []
    for _ in range(cycles):
        x += H.vcycle(b - A @ x)
        e = np.linalg.norm(xs - x)
        out.append(e / prev)
        prev = e
    return np.array(out)


def test_vcycle_stationary_contraction_poisson_32():
    A = poisson2d(32, 32)
    f = _stationary_factors(A, amg_setup(A))
    assert f.max() < 0.7
    # the two-grid method with the same smoother halves the error every cycle
    g = _stationary_factors(A, amg_setup(A, AmgParams(coarsest_max_dof=A.nrows // 2)))
    assert g.max() <= 0.5


@pytest.mark.xfail(strict=True, reason="unsmoothed pairwise V-cycle contracts by about 0.65-0.68 "
                                       "per cycle on this problem, not 0.5; see two-grid test above")
def test_vcycle_halves_error_every_cycle_poisson_32():
    A = poisson2d(32, 32)
    assert _stationary_factors(A, amg_setup(A)).max() <= 0.5


def test_amg_preconditioned_gmres_beats_plain():
    A = poisson2d(32, 32)
    b = np.ones(A.nrows)
    cfg = GmresConfig(rel_tolerance=1e-8)
    _, pre = gmres_solve(A, b, precond=amg_setup(A), config=cfg)
    _, plain = gmres_solve(A, b, config=cfg)
    assert pre.converged and pre.iterations < plain.iterations / 3
