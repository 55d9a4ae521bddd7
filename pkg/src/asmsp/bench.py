"""Benchmark pipelines behind the ``asmsp-bench`` command."""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .amg import AmgParams, amg_setup
from .coloring import color_matrix, write_plan
from .krylov import GmresConfig
from .msp import MspConfig, TransferOperators, asmsp_solve_sequence, extract_pressure_matrix
from .parallel import get_num_threads, set_num_threads
from .problems import (
    BlockProblemSpec,
    GridSpec,
    NewtonSequenceSpec,
    block_jacobian,
    lognormal_permeability,
    newton_sequence,
    poisson2d,
)
from .smoothers import SmootherKind
from .sparse import read_matrix_market, read_vector

REPORT_FIELDS = (
    "smoother",
    "mu",
    "steps",
    "setup_calls",
    "setup_ratio",
    "iterations",
    "converged",
    "wall_time_seconds",
    "threads",
)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_INPUT_ERROR = 3


class Source(str, enum.Enum):
    MATRIX_MARKET = "matrix-market"
    POISSON2D = "poisson2d"
    BLOCKCOMP = "blockcomp"
    NEWTON_SEQ = "newton-seq"


@dataclass
class RunConfig:
    source: Source = Source.POISSON2D
    matrix: str | None = None
    rhs: str | None = None
    block_size: int = 1
    nx: int = 16
    ny: int = 16
    nz: int = 1
    nc: int = 2
    dt: float = 1.0
    coupling: float = 1.0
    margin: float = 0.1
    perm_sigma: float = 1.0
    drift: float = 1e-2
    steps: int = 10
    mu: float = 0
    smoother: SmootherKind = SmootherKind.PGS_MC
    gmres: GmresConfig = field(default_factory=GmresConfig)
    coarsest_max_dof: int = 100
    threads: int | None = None
    report_format: str = "csv"
    seed: int = 0
    dump_coloring: str | None = None
    dump_hierarchy: str | None = None

    def __post_init__(self):
        self.source = Source(self.source)
        self.smoother = SmootherKind(self.smoother)
        if self.report_format not in ("csv", "json"):
            raise ValueError("report_format must be csv or json")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")

    def block_spec(self) -> BlockProblemSpec:
        kappa = (
            lognormal_permeability(self.nx, self.ny, self.nz, sigma=self.perm_sigma, seed=self.seed)
            if self.perm_sigma > 0 else 1.0
        )
        grid = GridSpec(self.nx, self.ny, self.nz, permeability=kappa)
        return BlockProblemSpec(grid, n_c=self.nc, dt=self.dt, coupling_strength=self.coupling,
                                diagonal_dominance_margin=self.margin, seed=self.seed)

    def msp_config(self, smoother: SmootherKind | None = None) -> MspConfig:
        amg = AmgParams(coarsest_max_dof=self.coarsest_max_dof,
                        smoother=smoother or self.smoother, threads=self.threads)
        return MspConfig(amg=amg)


@dataclass
class BenchmarkReport:
    rows: list[dict]
    format: str = "csv"

    @property
    def exit_code(self) -> int:
        return EXIT_OK if all(r["converged"] for r in self.rows) else EXIT_NOT_CONVERGED

    def render(self) -> str:
        if self.format == "json":
            return json.dumps(self.rows, indent=2)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow(row)
        return buf.getvalue()


def _systems(cfg: RunConfig):
    """List of ``(A, b, transfers)`` for the configured source."""
    if cfg.source is Source.MATRIX_MARKET:
        if not cfg.matrix:
            raise ValueError("matrix-market source needs a matrix path")
        A = read_matrix_market(cfg.matrix)
        if cfg.rhs:
            b = read_vector(cfg.rhs)
            if b.shape != (A.nrows,):
                raise ValueError(f"rhs has {b.size} entries, matrix has {A.nrows} rows")
        else:
            b = A @ np.ones(A.nrows)
        return [(A, b, TransferOperators.for_size(A.nrows, cfg.block_size))]
    if cfg.source is Source.POISSON2D:
        A = poisson2d(cfg.nx, cfg.ny)
        x = np.random.default_rng(cfg.seed).standard_normal(A.nrows)
        return [(A, A @ x, TransferOperators.for_size(A.nrows, 1))]
    if cfg.source is Source.BLOCKCOMP:
        s = block_jacobian(cfg.block_spec())
        return [(s.A, s.b, s.transfers)]
    seq = NewtonSequenceSpec(cfg.block_spec(), steps=cfg.steps, drift=cfg.drift, seed=cfg.seed)
    return list(newton_sequence(seq))


def _mu_field(mu):
    if isinstance(mu, float) and math.isinf(mu):
        return "inf"
    return int(mu) if float(mu).is_integer() else mu


def _run(cfg: RunConfig, systems, smoother: SmootherKind) -> dict:
    _, stats = asmsp_solve_sequence(
        systems, cfg.mu, msp_config=cfg.msp_config(smoother),
        gmres_config=cfg.gmres, raise_on_failure=False,
    )
    return {
        "smoother": smoother.value,
        "mu": _mu_field(cfg.mu),
        "steps": len(stats.steps),
        "setup_calls": stats.setup_calls,
        "setup_ratio": round(stats.setup_ratio, 6),
        "iterations": stats.iterations,
        "converged": stats.converged,
        "wall_time_seconds": round(stats.time_seconds, 6),
        "threads": cfg.threads if cfg.threads is not None else get_num_threads(),
        "_step_iterations": [s.iterations for s in stats.steps],
    }


def _public(row: dict) -> dict:
    return {k: row[k] for k in REPORT_FIELDS}


def _dumps(cfg: RunConfig, systems):
    if not (cfg.dump_coloring or cfg.dump_hierarchy):
        return
    A, _, transfers = systems[0]
    A_PP = extract_pressure_matrix(A, transfers)
    if cfg.dump_coloring:
        write_plan(color_matrix(A_PP), cfg.dump_coloring)
    if cfg.dump_hierarchy:
        amg_setup(A_PP, cfg.msp_config().amg).dump(cfg.dump_hierarchy)


def _with_threads(cfg: RunConfig, fn):
    previous = get_num_threads()
    if cfg.threads is not None:
        set_num_threads(cfg.threads)
    try:
        return fn()
    finally:
        set_num_threads(previous)


def run_benchmark(cfg: RunConfig) -> BenchmarkReport:
    """Run the configured solver stack once; one report row."""
    def go():
        systems = _systems(cfg)
        _dumps(cfg, systems)
        return BenchmarkReport([_public(_run(cfg, systems, cfg.smoother))], cfg.report_format)
    return _with_threads(cfg, go)


COMPARISON = (SmootherKind.JACOBI, SmootherKind.GS, SmootherKind.PGS_MC, SmootherKind.GS_COLOR)


def compare_smoothers(cfg: RunConfig, kinds=COMPARISON, detailed: bool = False) -> BenchmarkReport:
    """Same problem and settings under each AMG smoother, one row per smoother.

    ``gs-color`` is sequential Gauss-Seidel visiting rows in the multi-color
    order, the reference the parallel variant must reproduce.
    """
    def go():
        systems = _systems(cfg)
        _dumps(cfg, systems)
        rows = [_run(cfg, systems, SmootherKind(k)) for k in kinds]
        return BenchmarkReport(rows if detailed else [_public(r) for r in rows], cfg.report_format)
    return _with_threads(cfg, go)


def mu_sweep(cfg: RunConfig, mus) -> BenchmarkReport:
    """One row per threshold over the same problem sequence."""
    def go():
        systems = _systems(cfg)
        rows = [_public(_run(replace(cfg, mu=mu), systems, cfg.smoother)) for mu in mus]
        return BenchmarkReport(rows, cfg.report_format)
    return _with_threads(cfg, go)
