import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asmsp import SparseMatrix
from asmsp.errors import DimensionMismatch
from asmsp.krylov import GmresConfig, gmres_solve


def rand_nonsym(n, seed, shift=None):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    if shift is not None:
        A += shift * np.eye(n)
    return A


def true_rel(A, x, b):
    return np.linalg.norm(b - A @ x) / np.linalg.norm(b)


def test_defaults():
    cfg = GmresConfig()
    assert (cfg.restart, cfg.max_iterations, cfg.rel_tolerance) == (30, 1000, 1e-5)


@pytest.mark.parametrize("kw", [{"restart": 0}, {"rel_tolerance": 0.0}, {"rel_tolerance": 1.0},
                                {"max_iterations": -1}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        GmresConfig(**kw)


def test_identity_one_iteration():
    b = np.array([3.0, -1.0, 2.0])
    x, st_ = gmres_solve(SparseMatrix.identity(3), b)
    assert st_.iterations == 1 and st_.converged
    np.testing.assert_allclose(x, b)


def test_diagonal_three_distinct_eigenvalues():
    A = SparseMatrix.from_dense(np.diag([1.0, 2.0, 4.0]))
    x, st_ = gmres_solve(A, [1.0, 2.0, 4.0], config=GmresConfig(rel_tolerance=1e-12))
    assert st_.iterations <= 3 and st_.converged
    np.testing.assert_allclose(x, np.ones(3), rtol=1e-10)


def test_random_nonsymmetric_matches_direct():
    A = rand_nonsym(30, seed=1, shift=8.0)
    b = np.random.default_rng(2).standard_normal(30)
    x, st_ = gmres_solve(A, b)
    ref = np.linalg.solve(A, b)
    assert st_.converged
    assert np.linalg.norm(x - ref) <= 1e-4 * np.linalg.norm(ref)


def test_zero_rhs():
    x, st_ = gmres_solve(np.eye(4), np.zeros(4), x0=np.ones(4))
    assert st_.iterations == 0 and st_.converged
    np.testing.assert_array_equal(x, np.zeros(4))


def test_nonzero_initial_guess_is_used():
    A = rand_nonsym(10, seed=3, shift=6.0)
    b = np.ones(10)
    xs = np.linalg.solve(A, b)
    _, st_ = gmres_solve(A, b, x0=xs)
    assert st_.iterations == 0 and st_.converged


@given(st.integers(2, 50), st.integers(0, 10_000))
def test_exact_inverse_preconditioner_one_iteration(n, seed):
    A = rand_nonsym(n, seed, shift=2.0 * np.sqrt(n))
    Ainv = np.linalg.inv(A)
    b = np.random.default_rng(seed).standard_normal(n)
    x, st_ = gmres_solve(A, b, precond=lambda v: Ainv @ v)
    assert st_.iterations == 1 and st_.converged
    assert abs(st_.final_relative_residual - true_rel(A, x, b)) <= 1e-12


@given(st.integers(2, 50), st.integers(1, 30), st.integers(0, 10_000))
def test_reported_residual_is_true_residual(n, m, seed):
    A = rand_nonsym(n, seed, shift=np.sqrt(n))
    b = np.random.default_rng(seed + 7).standard_normal(n)
    x, st_ = gmres_solve(A, b, config=GmresConfig(restart=m, max_iterations=200))
    assert abs(st_.final_relative_residual - true_rel(A, x, b)) <= 1e-12
    if st_.converged:
        assert st_.final_relative_residual <= 1e-5


def test_max_iterations_reports_failure():
    A = rand_nonsym(40, seed=4)
    b = np.ones(40)
    x, st_ = gmres_solve(A, b, config=GmresConfig(restart=5, max_iterations=7))
    assert not st_.converged and st_.iterations == 7
    assert st_.final_relative_residual == pytest.approx(true_rel(A, x, b), abs=1e-12)


def test_restarts_are_counted():
    A = rand_nonsym(40, seed=5, shift=20.0)
    _, st_ = gmres_solve(A, np.ones(40), config=GmresConfig(restart=3))
    assert st_.converged and st_.restarts >= st_.iterations / 3


def test_two_pass_agrees_with_single_pass():
    A = rand_nonsym(25, seed=6, shift=6.0)
    b = np.arange(25.0)
    x1, s1 = gmres_solve(A, b)
    x2, s2 = gmres_solve(A, b, config=GmresConfig(two_pass=True))
    assert s1.iterations == s2.iterations
    np.testing.assert_allclose(x1, x2, rtol=1e-8)


def test_operator_preconditioner_via_matmul():
    A = rand_nonsym(8, seed=7, shift=4.0)
    x, st_ = gmres_solve(A, np.ones(8), precond=np.linalg.inv(A))
    assert st_.iterations == 1


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        gmres_solve(np.eye(3), np.ones(3), x0=np.ones(4))


def test_stats_serialize():
    _, st_ = gmres_solve(np.eye(2), np.ones(2))
    json.dumps(st_.to_dict())
