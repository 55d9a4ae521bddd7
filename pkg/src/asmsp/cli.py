"""``asmsp-bench``: generate or load systems, solve them, print a metrics table.

Every long option can also be set through an environment variable named
``ASMSP_`` plus the option in upper case with dashes turned into
underscores (``--threads`` reads ``ASMSP_THREADS``).  Command-line values win.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys

from .bench import (
    EXIT_INPUT_ERROR,
    RunConfig,
    Source,
    compare_smoothers,
    run_benchmark,
)
from .errors import DimensionMismatch, MatrixMarketError, SingularMatrixError
from .krylov import GmresConfig

ENV_PREFIX = "ASMSP_"

log = logging.getLogger("asmsp")


def _mu(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("mu must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="asmsp-bench",
        description="Run the multi-stage preconditioned GMRES benchmark and report solver metrics.",
    )
    src = p.add_argument_group("problem source")
    src.add_argument("--matrix", metavar="PATH", help="Matrix Market file to solve")
    src.add_argument("--rhs", metavar="PATH", help="right-hand side, one value per line (default A*ones)")
    src.add_argument("--block-size", type=int, default=1,
                     help="unknowns per cell for --matrix input, pressure first (default 1)")
    src.add_argument("--gen", choices=[s.value for s in Source if s is not Source.MATRIX_MARKET],
                     help="generate a problem instead of reading one")
    gen = p.add_argument_group("generator")
    gen.add_argument("--nx", type=int, default=16)
    gen.add_argument("--ny", type=int, default=16)
    gen.add_argument("--nz", type=int, default=1)
    gen.add_argument("--nc", type=int, default=2, help="components per cell")
    gen.add_argument("--dt", type=float, default=1.0, help="time step")
    gen.add_argument("--coupling", type=float, default=1.0, help="pressure-concentration coupling strength")
    gen.add_argument("--sigma", type=float, default=1.0, help="log-permeability standard deviation")
    gen.add_argument("--drift", type=float, default=1e-2, help="relative change per Newton step")
    gen.add_argument("--steps", type=int, default=10, help="Newton steps in the sequence")
    gen.add_argument("--seed", type=int, default=0)
    sol = p.add_argument_group("solver")
    sol.add_argument("--mu", type=_mu, default=0.0, help="reuse threshold in iterations ('inf' never rebuilds)")
    sol.add_argument("--smoother", choices=["jacobi", "gs", "gs-color", "pgs-mc"], default="pgs-mc")
    sol.add_argument("--compare-smoothers", action="store_true",
                     help="run jacobi, gs, pgs-mc and gs-color on the same problem")
    sol.add_argument("--restart", type=int, default=30)
    sol.add_argument("--maxit", type=int, default=1000)
    sol.add_argument("--tol", type=float, default=1e-5)
    sol.add_argument("--coarsest", type=int, default=100, help="largest AMG level solved directly")
    sol.add_argument("--threads", type=int, default=None, help="worker threads (default: all CPUs)")
    out = p.add_argument_group("output")
    out.add_argument("--report", choices=["csv", "json"], default="csv")
    out.add_argument("--output", metavar="PATH", help="write the report here instead of stdout")
    out.add_argument("--dump-coloring", metavar="PATH", help="write the finest pressure coloring")
    out.add_argument("--dump-hierarchy", metavar="PATH", help="write the AMG level summary (.json for JSON)")
    out.add_argument("-v", "--verbose", action="store_true")
    return p


def _apply_env(parser: argparse.ArgumentParser, environ) -> None:
    """Turn ``ASMSP_*`` variables into parser defaults."""
    defaults = {}
    for action in parser._actions:
        if not action.option_strings or action.dest == "help":
            continue
        value = environ.get(ENV_PREFIX + action.dest.upper())
        if value is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = value.strip().lower() in ("1", "true", "yes", "on")
        else:
            defaults[action.dest] = action.type(value) if action.type else value
    parser.set_defaults(**defaults)


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    if ns.matrix and ns.gen:
        raise ValueError("--matrix and --gen are mutually exclusive")
    if ns.rhs and not ns.matrix:
        raise ValueError("--rhs requires --matrix")
    if ns.matrix:
        source = Source.MATRIX_MARKET
    else:
        source = Source(ns.gen or Source.POISSON2D.value)
    if ns.threads is not None and ns.threads < 1:
        raise ValueError("--threads must be >= 1")
    return RunConfig(
        source=source, matrix=ns.matrix, rhs=ns.rhs, block_size=ns.block_size,
        nx=ns.nx, ny=ns.ny, nz=ns.nz, nc=ns.nc, dt=ns.dt, coupling=ns.coupling,
        perm_sigma=ns.sigma, drift=ns.drift, steps=ns.steps, mu=ns.mu,
        smoother=ns.smoother,
        gmres=GmresConfig(restart=ns.restart, max_iterations=ns.maxit, rel_tolerance=ns.tol),
        coarsest_max_dof=ns.coarsest, threads=ns.threads, report_format=ns.report,
        seed=ns.seed, dump_coloring=ns.dump_coloring, dump_hierarchy=ns.dump_hierarchy,
    )


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    _apply_env(parser, os.environ if environ is None else environ)
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(ns)
        report = compare_smoothers(cfg) if ns.compare_smoothers else run_benchmark(cfg)
    except (OSError, MatrixMarketError, DimensionMismatch, SingularMatrixError, ValueError) as exc:
        print(f"asmsp-bench: error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    text = report.render()
    if ns.output:
        with open(ns.output, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if report.exit_code:
        log.warning("at least one solve did not reach the tolerance")
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
