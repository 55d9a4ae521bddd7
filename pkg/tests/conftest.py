"""Shared fixtures and independent dense oracles for the test-suite."""
from __future__ import annotations

import time
from contextlib import contextmanager

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, settings

from asmsp import SparseMatrix

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_sparse(n, density, seed, *, diag_shift=None, symmetric=False, m=None):
    """Random sparse matrix; with ``diag_shift`` the diagonal dominates rows."""
    rng = np.random.default_rng(seed)
    m = n if m is None else m
    M = sp.random(n, m, density=density, random_state=rng, format="csr")
    M.data = rng.uniform(-1.0, 1.0, M.data.size)
    if symmetric:
        M = (M + M.T).tocsr()
    if diag_shift is not None:
        rowsum = np.asarray(abs(M).sum(axis=1)).ravel()
        M = (M + sp.diags(rowsum + diag_shift)).tocsr()
    return SparseMatrix.from_scipy(M)


def dense_gs(A: np.ndarray, x, b, order, sweeps=1):
    """Textbook Gauss-Seidel on a dense array, rows visited in ``order``."""
    x = np.array(x, dtype=float, copy=True)
    for _ in range(sweeps):
        for i in order:
            s = b[i] - A[i] @ x + A[i, i] * x[i]
            x[i] = s / A[i, i]
    return x


def brute_force_independent(A: np.ndarray, groups) -> bool:
    """No two members of a group are coupled in either direction."""
    for g in groups:
        for a in g:
            for c in g:
                if a != c and (A[a, c] != 0 or A[c, a] != 0):
                    return False
    return True


def dense_operator(apply, n):
    """Matrix of a linear map assembled column by column."""
    return np.column_stack([apply(e) for e in np.eye(n)])


def random_block_system(ncells, bs, seed, density=0.6):
    """Small dense-ish cell-blocked system with dominant diagonal blocks."""
    rng = np.random.default_rng(seed)
    n = ncells * bs
    pattern = rng.random((ncells, ncells)) < density
    np.fill_diagonal(pattern, True)
    A = np.kron(pattern.astype(float), np.ones((bs, bs))) * rng.uniform(-1, 1, (n, n))
    A += np.diag(np.abs(A).sum(axis=1) + rng.uniform(0.5, 2.0, n))
    return SparseMatrix.from_dense(A)


def three_factor_product(M):
    """Dense (I - R A)(I - Pp Bp Pp^T A)(I - Pn Bn Pn^T A) from the stage operators."""
    A = M.A.toarray()
    n = A.shape[0]
    T = M.transfers
    I = np.eye(n)
    R = dense_operator(M.R.apply, n)
    PP = I[:, T.pressure_indices]
    BP = dense_operator(M.B_P.vcycle, PP.shape[1])
    E = (I - R @ A) @ (I - PP @ BP @ PP.T @ A)
    if M.B_N is not None:
        PN = I[:, T.concentration_indices]
        BN = dense_operator(M.B_N.apply, PN.shape[1])
        E = E @ (I - PN @ BN @ PN.T @ A)
    return E


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance reporting -----------------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@contextmanager
def criterion(name: str):
    """Record one PASS/FAIL line for an acceptance criterion.

    The body fills the yielded dict with measured values; they are printed
    next to the verdict so the report shows what was actually observed.
    """
    detail: dict = {}
    t0 = time.perf_counter()
    try:
        yield detail
    except BaseException:
        verdict = "FAIL"
        raise
    else:
        verdict = "PASS"
    finally:
        detail.setdefault("seconds", round(time.perf_counter() - t0, 2))
        facts = ", ".join(f"{k}={v}" for k, v in detail.items())
        line = f"{verdict} {name} ({facts})"
        ACCEPTANCE_LINES.append(line)
        print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
