"""Multiplicative multi-stage preconditioner and its adaptive-setup driver.

One application corrects the concentration unknowns with block Gauss-Seidel,
then the pressure unknowns with an AMG V-cycle, then the whole system with
block ILU(0), recomputing the residual against the current matrix between
stages.  The error propagator is

    I - B A = (I - R A)(I - Pp Bp Pp^T A)(I - Pn Bn Pn^T A).

The adaptive driver reuses the previous preconditioner while the previous
linear solve stayed within ``mu`` iterations.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .amg import AmgHierarchy, AmgParams, amg_setup
from .errors import ConvergenceError, DimensionMismatch, SingularMatrixError
from .krylov import GmresConfig, gmres_solve
from .smoothers import BlockGsState, BlockIluFactorization, bgs_setup, bilu0_setup
from .sparse import BlockLayout, Ordering, SparseMatrix, submatrix


@dataclass(frozen=True, eq=False)
class TransferOperators:
    """Index maps selecting the pressure and concentration unknowns.

    Restriction is ``v[indices]``; prolongation scatters back into a zero
    vector of full length.
    """

    layout: BlockLayout
    pressure_indices: np.ndarray
    concentration_indices: np.ndarray

    @classmethod
    def from_layout(cls, layout: BlockLayout) -> "TransferOperators":
        return cls(layout, layout.pressure_indices(), layout.concentration_indices())

    @classmethod
    def for_size(cls, n: int, block_size: int, ordering=Ordering.CELL_INTERLEAVED) -> "TransferOperators":
        if n % block_size:
            raise DimensionMismatch(f"{n} unknowns do not split into blocks of {block_size}")
        return cls.from_layout(BlockLayout(n // block_size, block_size, ordering))

    @property
    def n(self) -> int:
        return self.layout.n

    @property
    def n_components(self) -> int:
        return self.layout.block_size - 1

    def check(self, A: SparseMatrix) -> None:
        if A.nrows != self.n or A.ncols != self.n:
            raise DimensionMismatch(f"matrix {A.shape} inconsistent with layout of {self.n} unknowns")


def extract_pressure_matrix(A: SparseMatrix, transfers: TransferOperators) -> SparseMatrix:
    """Pressure-pressure block, cells in order."""
    transfers.check(A)
    return submatrix(A, transfers.pressure_indices)


def extract_concentration_matrix(A: SparseMatrix, transfers: TransferOperators) -> SparseMatrix:
    """Concentration block, cell-interleaved with ``n_c`` unknowns per cell."""
    transfers.check(A)
    return submatrix(A, transfers.concentration_indices)


def no_decoupling(A: SparseMatrix, transfers: TransferOperators) -> SparseMatrix:
    return A


@dataclass(frozen=True)
class MspConfig:
    amg: AmgParams = field(default_factory=AmgParams)
    bgs_sweeps: int = 1
    # hook for pre-scaling before the pressure block is extracted; identity by default
    decouple: Callable[[SparseMatrix, TransferOperators], SparseMatrix] = no_decoupling


@dataclass(eq=False)
class MspPreconditioner:
    A: SparseMatrix
    transfers: TransferOperators
    B_N: BlockGsState | None
    B_P: AmgHierarchy
    R: BlockIluFactorization
    setup_time: float = 0.0

    def apply(self, g) -> np.ndarray:
        return msp_apply(self, g)

    __call__ = apply

    def with_matrix(self, A_new: SparseMatrix) -> "MspPreconditioner":
        """Same stage operators, residuals taken against ``A_new``."""
        self.transfers.check(A_new)
        return replace(self, A=A_new, setup_time=0.0)


def msp_setup(A: SparseMatrix, transfers: TransferOperators, config: MspConfig | None = None) -> MspPreconditioner:
    config = config or MspConfig()
    transfers.check(A)
    t0 = time.perf_counter()
    Ad = config.decouple(A, transfers)
    B_N = None
    if transfers.n_components > 0:
        A_NN = extract_concentration_matrix(Ad, transfers)
        nn_layout = BlockLayout(transfers.layout.ncells, transfers.n_components)
        try:
            B_N = bgs_setup(A_NN, nn_layout, sweeps=config.bgs_sweeps)
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"concentration stage (BGS): {exc}", index=exc.index, stage="bgs") from exc
    A_PP = extract_pressure_matrix(Ad, transfers)
    try:
        B_P = amg_setup(A_PP, config.amg)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"pressure stage (AMG): {exc}", index=exc.index, stage="amg") from exc
    try:
        R = bilu0_setup(A, transfers.layout)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"relaxation stage (BILU): {exc}", index=exc.index, stage="bilu") from exc
    return MspPreconditioner(A, transfers, B_N, B_P, R, time.perf_counter() - t0)


def msp_apply(M: MspPreconditioner, g) -> np.ndarray:
    """``w = B g`` by the three corrections, starting from ``w = 0``."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (M.A.nrows,):
        raise DimensionMismatch("vector does not match preconditioner size")
    A, T = M.A, M.transfers
    w = np.zeros_like(g)
    r = g - A @ w
    if M.B_N is not None:
        w[T.concentration_indices] += M.B_N.apply(r[T.concentration_indices])
        r = g - A @ w
    w[T.pressure_indices] += M.B_P.vcycle(r[T.pressure_indices])
    r = g - A @ w
    w += M.R.apply(r)
    return w


# adaptive setup -----------------------------------------------------------------

class Decision(str, enum.Enum):
    REUSE = "reuse"
    SETUP = "setup"


@dataclass
class AdaptiveState:
    """Controller state; ``iota`` is the 1-based index of the step being solved."""

    mu: float
    iota: int = 1
    last_iterations: int | None = None
    cached: MspPreconditioner | None = None
    setup_calls: int = 0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be non-negative")


def asmsp_decide(state: AdaptiveState, A_new: SparseMatrix) -> Decision:
    if state.iota == 1 or state.cached is None or state.last_iterations is None:
        return Decision.SETUP
    if state.cached.A.shape != A_new.shape:
        return Decision.SETUP
    if state.last_iterations > state.mu:
        return Decision.SETUP
    return Decision.REUSE


class AdaptiveSetup:
    """Single-owner driver around :class:`AdaptiveState`."""

    def __init__(self, mu: float, config: MspConfig | None = None):
        self.state = AdaptiveState(mu)
        self.config = config or MspConfig()

    def prepare(self, A: SparseMatrix, transfers: TransferOperators) -> tuple[MspPreconditioner, Decision]:
        st = self.state
        decision = asmsp_decide(st, A)
        if decision is Decision.SETUP:
            st.cached = msp_setup(A, transfers, self.config)
            st.setup_calls += 1
            return st.cached, decision
        return st.cached.with_matrix(A), decision

    def record(self, iterations: int) -> None:
        self.state.last_iterations = int(iterations)
        self.state.iota += 1


@dataclass
class StepRecord:
    iota: int
    decision: Decision
    iterations: int
    converged: bool
    relative_residual: float
    setup_time: float
    solve_time: float


@dataclass
class SequenceStats:
    mu: float
    setup_calls: int = 0
    setup_ratio: float = 0.0
    iterations: int = 0
    time_seconds: float = 0.0
    setup_seconds: float = 0.0
    converged: bool = True
    steps: list[StepRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        mu = self.mu if math.isfinite(self.mu) else None
        if isinstance(mu, float) and mu.is_integer():
            mu = int(mu)
        return {
            "mu": mu,
            "setup_calls": self.setup_calls,
            "setup_ratio": self.setup_ratio,
            "iterations": self.iterations,
            "time_seconds": self.time_seconds,
        }


def _unpack(item, block_size):
    if len(item) == 3:
        return item
    A, b = item
    return A, b, TransferOperators.for_size(A.nrows, block_size)


def asmsp_solve_sequence(problems: Iterable, mu: float, *, block_size: int = 1,
                         msp_config: MspConfig | None = None,
                         gmres_config: GmresConfig | None = None,
                         raise_on_failure: bool = True):
    """Solve a sequence of Jacobian systems with adaptive preconditioner reuse.

    ``problems`` yields ``(A, b)`` pairs (transfers built from ``block_size``)
    or ``(A, b, transfers)`` triples.  Returns ``(solutions, SequenceStats)``.
    ``setup_ratio`` is setup time over setup-plus-GMRES time.
    """
    gmres_config = gmres_config or GmresConfig()
    driver = AdaptiveSetup(mu, msp_config)
    stats = SequenceStats(mu=mu)
    solutions = []
    for item in problems:
        A, b, transfers = _unpack(item, block_size)
        iota = driver.state.iota
        M, decision = driver.prepare(A, transfers)
        setup_time = M.setup_time if decision is Decision.SETUP else 0.0
        x, st = gmres_solve(A, b, precond=M, config=gmres_config)
        driver.record(st.iterations)
        stats.steps.append(StepRecord(iota, decision, st.iterations, st.converged,
                                      st.final_relative_residual, setup_time, st.wall_time))
        stats.iterations += st.iterations
        stats.setup_seconds += setup_time
        stats.time_seconds += setup_time + st.wall_time
        solutions.append(x)
        if not st.converged:
            stats.converged = False
            if raise_on_failure:
                raise ConvergenceError(
                    f"GMRES did not converge at step {iota}: relative residual {st.final_relative_residual:.3e}",
                    step=iota, residual=st.final_relative_residual,
                )
    stats.setup_calls = driver.state.setup_calls
    stats.setup_ratio = stats.setup_seconds / stats.time_seconds if stats.time_seconds > 0 else 0.0
    return solutions, stats


def msp_solve(A: SparseMatrix, b, transfers: TransferOperators, msp_config: MspConfig | None = None,
              gmres_config: GmresConfig | None = None):
    """Set up once and solve one system; returns ``(x, SolveStats)``."""
    M = msp_setup(A, transfers, msp_config)
    x, st = gmres_solve(A, b, precond=M, config=gmres_config)
    st.setup_calls = 1
    total = M.setup_time + st.wall_time
    st.setup_ratio = M.setup_time / total if total > 0 else 0.0
    st.wall_time = total
    return x, st
