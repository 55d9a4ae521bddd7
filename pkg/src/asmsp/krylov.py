"""Right-preconditioned restarted GMRES(m)."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class GmresConfig:
    restart: int = 30
    max_iterations: int = 1000
    rel_tolerance: float = 1e-5
    two_pass: bool = False

    def __post_init__(self):
        if self.restart < 1:
            raise ValueError("restart must be >= 1")
        if not 0.0 < self.rel_tolerance < 1.0:
            raise ValueError("rel_tolerance must lie in (0, 1)")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class SolveStats:
    iterations: int = 0
    converged: bool = False
    final_relative_residual: float = float("nan")
    setup_calls: int = 0
    setup_ratio: float = 0.0
    wall_time: float = 0.0
    breakdown: bool = False
    restarts: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _apply(op, v):
    if op is None:
        return v
    if callable(op):
        return op(v)
    return op @ v


def gmres_solve(A, b, x0=None, precond=None, config: GmresConfig | None = None):
    """Solve ``A x = b`` with GMRES(m), preconditioned on the right.

    ``A`` is anything supporting ``A @ v``; ``precond`` is a callable (or an
    object supporting ``@``) applying a fixed linear operator, or ``None``.
    The reported residual is always the explicitly recomputed
    ``||b - A x|| / ||b||``.  Returns ``(x, SolveStats)``.
    """
    cfg = config or GmresConfig()
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    if x.shape != b.shape:
        raise DimensionMismatch("x0 and b differ in length")
    stats = SolveStats()

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x[:] = 0.0
        stats.converged, stats.final_relative_residual = True, 0.0
        stats.wall_time = time.perf_counter() - t0
        return x, stats

    tol = cfg.rel_tolerance
    m = cfg.restart
    r = b - A @ x
    rel = np.linalg.norm(r) / bnorm
    total = 0
    breakdown_tol = 1e-14 * bnorm

    while rel > tol and total < cfg.max_iterations:
        beta = np.linalg.norm(r)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        broke = False
        for j in range(m):
            w = A @ _apply(precond, V[j])
            for p in range(2 if cfg.two_pass else 1):
                for i in range(j + 1):
                    h = V[i] @ w
                    H[i, j] += h
                    w -= h * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            for i in range(j):
                a, c = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * a + sn[i] * c
                H[i + 1, j] = -sn[i] * a + cs[i] * c
            a, c = H[j, j], H[j + 1, j]
            denom = np.hypot(a, c)
            cs[j], sn[j] = (1.0, 0.0) if denom == 0.0 else (a / denom, c / denom)
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            k = j + 1
            hnext = np.linalg.norm(w)
            if hnext < breakdown_tol:
                broke = True
                break
            if abs(g[j + 1]) / bnorm <= tol or total >= cfg.max_iterations:
                break
            V[j + 1] = w / hnext

        y = _back_substitute(H[:k, :k], g[:k])
        x += _apply(precond, V[:k].T @ y)
        r = b - A @ x
        rel = np.linalg.norm(r) / bnorm
        stats.restarts += 1
        if broke and rel > tol:
            stats.breakdown = True
            break

    stats.iterations = total
    stats.final_relative_residual = float(rel)
    stats.converged = bool(rel <= tol)
    stats.wall_time = time.perf_counter() - t0
    return x, stats


def _back_substitute(R: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = g.shape[0]
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        s = g[i] - R[i, i + 1:k] @ y[i + 1:k]
        y[i] = s / R[i, i] if R[i, i] != 0.0 else 0.0
    return y
