"""Synthetic reservoir-style test systems.

* ``tpfa_pressure_matrix``: two-point flux pressure operator on a Cartesian grid.
* ``block_jacobian``: cell-blocked system with one pressure and ``n_c``
  concentration unknowns per cell whose pressure block is exactly the TPFA
  matrix; the other couplings are seeded synthetic coefficients.
* ``newton_sequence``: a chain of slowly drifting systems sharing one pattern,
  standing in for the Jacobians of successive Newton steps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp

from .msp import TransferOperators
from .sparse import BlockLayout, SparseMatrix, read_matrix_market, read_vector, write_matrix_market, write_vector


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Cartesian grid; cell ``(i, j, k)`` has index ``i + nx * (j + ny * k)``.

    ``permeability`` and ``porosity`` are scalars or arrays of ``ncells`` values.
    """

    nx: int
    ny: int = 1
    nz: int = 1
    dx: float = 1.0
    dy: float = 1.0
    dz: float = 1.0
    permeability: float | np.ndarray = 1.0
    porosity: float | np.ndarray = 0.2

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("grid needs at least one cell per direction")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError("cell dimensions must be positive")
        kappa = np.broadcast_to(np.asarray(self.permeability, dtype=np.float64), (self.ncells,)).copy()
        phi = np.broadcast_to(np.asarray(self.porosity, dtype=np.float64), (self.ncells,)).copy()
        if np.any(kappa <= 0):
            raise ValueError("permeability must be positive")
        if np.any(phi <= 0) or np.any(phi > 1):
            raise ValueError("porosity must lie in (0, 1]")
        object.__setattr__(self, "permeability", kappa)
        object.__setattr__(self, "porosity", phi)

    @property
    def ncells(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz

    def describe(self) -> dict:
        return {
            "nx": self.nx, "ny": self.ny, "nz": self.nz,
            "dx": self.dx, "dy": self.dy, "dz": self.dz,
        }


def lognormal_permeability(nx: int, ny: int = 1, nz: int = 1, mean: float = 1.0, sigma: float = 1.0,
                           seed: int = 0) -> np.ndarray:
    """Uncorrelated lognormal field with median ``mean``; ``sigma`` sets the contrast."""
    rng = np.random.default_rng(seed)
    return mean * np.exp(sigma * rng.standard_normal(nx * ny * nz))


def harmonic_mean(a, b):
    return 2.0 * a * b / (a + b)


def face_transmissibilities(grid: GridSpec):
    """Arrays ``(left, right, T)`` over all interior faces, x then y then z."""
    idx = np.arange(grid.ncells).reshape(grid.nz, grid.ny, grid.nx)
    kappa = grid.permeability
    out = []
    for axis, area, dist in (
        (2, grid.dy * grid.dz, grid.dx),
        (1, grid.dx * grid.dz, grid.dy),
        (0, grid.dx * grid.dy, grid.dz),
    ):
        if idx.shape[axis] < 2:
            continue
        lo = np.take(idx, np.arange(idx.shape[axis] - 1), axis=axis).reshape(-1)
        hi = np.take(idx, np.arange(1, idx.shape[axis]), axis=axis).reshape(-1)
        out.append((lo, hi, area * harmonic_mean(kappa[lo], kappa[hi]) / dist))
    if not out:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0)
    return tuple(np.concatenate(parts) for parts in zip(*out))


def accumulation(grid: GridSpec, dt: float) -> np.ndarray:
    return grid.porosity * grid.cell_volume / dt


def _tpfa_coo(n, lo, hi, T, acc):
    diag = acc + np.bincount(lo, T, n) + np.bincount(hi, T, n)
    rows = np.concatenate([np.arange(n), lo, hi])
    cols = np.concatenate([np.arange(n), hi, lo])
    return rows, cols, np.concatenate([diag, -T, -T])


def tpfa_pressure_matrix(grid: GridSpec, dt: float = 1.0) -> SparseMatrix:
    """Symmetric M-matrix: ``-T`` per face, diagonal = sum of face T + ``phi V / dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    lo, hi, T = face_transmissibilities(grid)
    n = grid.ncells
    rows, cols, vals = _tpfa_coo(n, lo, hi, T, accumulation(grid, dt))
    return SparseMatrix.from_scipy(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr())


def poisson2d(nx: int, ny: int | None = None) -> SparseMatrix:
    """5-point Laplacian with Dirichlet boundaries, stencil ``[-1, 4, -1]``."""
    ny = nx if ny is None else ny
    Tx = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], (nx, nx))
    Ty = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], (ny, ny))
    return SparseMatrix.from_scipy(sp.kronsum(Tx, Ty).tocsr())


def poisson3d(nx: int, ny: int | None = None, nz: int | None = None) -> SparseMatrix:
    """7-point Laplacian with Dirichlet boundaries."""
    ny = nx if ny is None else ny
    nz = nx if nz is None else nz
    T = [sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], (m, m)) for m in (nx, ny, nz)]
    return SparseMatrix.from_scipy(sp.kronsum(sp.kronsum(T[0], T[1]), T[2]).tocsr())


@dataclass(frozen=True, eq=False)
class BlockProblemSpec:
    grid: GridSpec
    n_c: int = 2
    dt: float = 1.0
    coupling_strength: float = 1.0
    diagonal_dominance_margin: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_c < 0:
            raise ValueError("n_c must be >= 0")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.coupling_strength < 0 or self.diagonal_dominance_margin < 0:
            raise ValueError("coupling_strength and diagonal_dominance_margin must be >= 0")

    @property
    def block_size(self) -> int:
        return self.n_c + 1


@dataclass(eq=False)
class BlockSystem:
    A: SparseMatrix
    b: np.ndarray
    transfers: TransferOperators
    x_exact: np.ndarray

    @property
    def layout(self) -> BlockLayout:
        return self.transfers.layout


@dataclass(frozen=True, eq=False)
class _Coefficients:
    """Seeded dimensionless draws behind the synthetic couplings."""

    mobility: np.ndarray     # (n_c, faces) in [0.5, 1)
    upwind: np.ndarray       # (n_c, faces) in [0, 0.5)
    flip: np.ndarray         # (n_c, faces) upstream side
    p_to_n: np.ndarray       # (cells, n_c) in [-1, 1)
    n_to_n: np.ndarray       # (n_c, n_c, cells) in [-0.3, 0.3)


def _draw(spec: BlockProblemSpec, nf: int, rng) -> _Coefficients:
    nc, ncells = spec.n_c, spec.grid.ncells
    mobility = np.empty((nc, nf))
    upwind = np.empty((nc, nf))
    flip = np.empty((nc, nf), dtype=bool)
    for k in range(nc):
        mobility[k] = rng.uniform(0.5, 1.0, nf)
        upwind[k] = rng.uniform(0.0, 0.5, nf)
        flip[k] = rng.random(nf) < 0.5
    p_to_n = rng.uniform(-1.0, 1.0, (ncells, nc))
    n_to_n = rng.uniform(-0.3, 0.3, (nc, nc, ncells))
    return _Coefficients(mobility, upwind, flip, p_to_n, n_to_n)


def _assemble(spec: BlockProblemSpec, co: _Coefficients, face_scale=1.0, cell_scale=1.0) -> sp.csr_matrix:
    grid, nc, bs = spec.grid, spec.n_c, spec.block_size
    c, margin = spec.coupling_strength, spec.diagonal_dominance_margin
    ncells = grid.ncells
    n = ncells * bs
    lo, hi, T = face_transmissibilities(grid)
    T = T * face_scale
    acc = accumulation(grid, spec.dt) * cell_scale

    def P(cell):
        return cell * bs

    def N(cell, k):
        return cell * bs + 1 + k

    rows, cols, vals = [], [], []

    def add(r, cc, v):
        rows.append(np.asarray(r).reshape(-1))
        cols.append(np.asarray(cc).reshape(-1))
        vals.append(np.broadcast_to(np.asarray(v, dtype=np.float64), np.shape(r)).reshape(-1))

    pr, pc, pv = _tpfa_coo(ncells, lo, hi, T, acc)
    add(P(pr), P(pc), pv)

    cells = np.arange(ncells)
    for k in range(nc):
        a = c * co.mobility[k] * T
        add(N(lo, k), P(hi), -a)
        add(N(lo, k), P(lo), a)
        add(N(hi, k), P(lo), -a)
        add(N(hi, k), P(hi), a)
        u = c * co.upwind[k] * T
        up = np.where(co.flip[k], hi, lo)
        down = np.where(co.flip[k], lo, hi)
        add(N(down, k), N(up, k), -u)
        add(N(up, k), N(up, k), u)
    if nc:
        # keeps sum_k |a_PN| below the accumulation term
        pn = co.p_to_n * (min(c, 1.0) * acc / (nc * (1.0 + margin)))[:, None]
    for k in range(nc):
        add(P(cells), N(cells, k), pn[:, k])
        add(N(cells, k), N(cells, k), acc)
        for j in range(nc):
            if j != k:
                add(N(cells, k), N(cells, j), c * acc * co.n_to_n[k, j])

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    A.sum_duplicates()
    if c == 0.0:
        # switched-off couplings would otherwise remain as stored zeros
        A.eliminate_zeros()
    if nc:
        A = _dominate_concentration_rows(A, bs, margin)
    A.sort_indices()
    return A


def block_jacobian(spec: BlockProblemSpec) -> BlockSystem:
    """Assemble a cell-interleaved block system with a manufactured solution.

    Per face, each concentration row couples to the neighbor pressure
    (conservative flux form) and to the upstream concentration; inside a cell,
    pressure rows couple weakly to concentrations and concentrations to each
    other.  Every concentration diagonal is raised to ``1 + margin`` times its
    off-diagonal row sum, and the pressure-to-concentration entries are capped
    below the accumulation term, so rows are strictly diagonally dominant when
    ``margin > 0``.  ``b = A @ x_exact`` for a seeded ``x_exact``.
    """
    return _generate(spec)[0]


def _generate(spec: BlockProblemSpec):
    rng = np.random.default_rng(spec.seed)
    nf = face_transmissibilities(spec.grid)[2].size
    co = _draw(spec, nf, rng)
    A = SparseMatrix.from_scipy(_assemble(spec, co))
    x_exact = rng.standard_normal(A.nrows)
    layout = BlockLayout(spec.grid.ncells, spec.block_size)
    return BlockSystem(A, A @ x_exact, TransferOperators.from_layout(layout), x_exact), co


def _dominate_concentration_rows(A: sp.csr_matrix, bs: int, margin: float) -> sp.csr_matrix:
    d = A.diagonal()
    offsum = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(d)
    conc = np.arange(A.shape[0]) % bs != 0
    target = (1.0 + margin) * offsum
    lift = conc & (d < target)
    d = d.copy()
    d[lift] = target[lift]
    A.setdiag(d)
    return A


@dataclass(frozen=True, eq=False)
class NewtonSequenceSpec:
    base: BlockProblemSpec
    steps: int = 10
    drift: float = 1e-2
    seed: int = 0
    resize_steps: tuple[int, ...] = ()

    def __post_init__(self):
        if self.steps < 0 or self.drift < 0:
            raise ValueError("steps and drift must be non-negative")


class NewtonStep(NamedTuple):
    A: SparseMatrix
    b: np.ndarray
    transfers: TransferOperators


def newton_sequence(spec: NewtonSequenceSpec) -> Iterator[NewtonStep]:
    """Yield ``spec.steps`` systems sharing one sparsity pattern.

    Between steps every face transmissibility and every cell accumulation
    term is multiplied by its own ``1 + drift * U(-1, 1)`` factor and the
    matrix is reassembled, so all values move by about ``drift`` relative
    while the pressure block stays an M-matrix.  The manufactured solution is
    fixed.  At a step listed in ``resize_steps`` (numbered from 1) the grid gains one cell
    layer in x and the chain restarts from a fresh system of the new size.
    """
    rng = np.random.default_rng(spec.seed)
    base = spec.base
    system, co = _generate(base)
    A, x_star = system.A, system.x_exact
    face_scale = np.ones(co.mobility.shape[1] if base.n_c else face_transmissibilities(base.grid)[2].size)
    cell_scale = np.ones(base.grid.ncells)
    for iota in range(1, spec.steps + 1):
        if iota in spec.resize_steps and iota > 1:
            g = base.grid
            grid = replace(g, nx=g.nx + 1, permeability=_regrow(g.permeability, g, g.nx + 1),
                           porosity=_regrow(g.porosity, g, g.nx + 1))
            base = replace(base, grid=grid, seed=base.seed + iota)
            system, co = _generate(base)
            A, x_star = system.A, system.x_exact
            face_scale = np.ones(face_transmissibilities(grid)[2].size)
            cell_scale = np.ones(grid.ncells)
        elif iota > 1 and spec.drift > 0:
            face_scale = face_scale * (1.0 + spec.drift * rng.uniform(-1.0, 1.0, face_scale.size))
            cell_scale = cell_scale * (1.0 + spec.drift * rng.uniform(-1.0, 1.0, cell_scale.size))
            A = SparseMatrix.from_scipy(_assemble(base, co, face_scale, cell_scale))
        yield NewtonStep(A, A @ x_star, system.transfers)


def _regrow(values: np.ndarray, grid: GridSpec, nx_new: int) -> np.ndarray:
    v = values.reshape(grid.nz, grid.ny, grid.nx)
    pad = np.concatenate([v, v[:, :, -1:]], axis=2)
    assert pad.shape[2] == nx_new
    return pad.reshape(-1)


# export ---------------------------------------------------------------------------

def export_problem(A: SparseMatrix, b, directory, name: str = "system", manifest: dict | None = None) -> dict:
    """Write ``name.mtx``, ``name.rhs`` and ``name.json`` under ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_market(A, out / f"{name}.mtx")
    write_vector(b, out / f"{name}.rhs")
    info = {"matrix": f"{name}.mtx", "rhs": f"{name}.rhs", "n": A.nrows, "nnz": A.nnz}
    info.update(manifest or {})
    (out / f"{name}.json").write_text(json.dumps(info, indent=2))
    return info


def export_block_problem(spec: BlockProblemSpec, directory, name: str = "system") -> dict:
    system = block_jacobian(spec)
    manifest = {
        "grid": spec.grid.describe(),
        "n_c": spec.n_c,
        "dt": spec.dt,
        "coupling_strength": spec.coupling_strength,
        "diagonal_dominance_margin": spec.diagonal_dominance_margin,
        "layout": system.layout.ordering.value,
        "block_size": spec.block_size,
        "seed": spec.seed,
    }
    return export_problem(system.A, system.b, directory, name, manifest)


def load_problem(manifest_path):
    """Read a problem written by :func:`export_problem`; returns ``(A, b, manifest)``."""
    path = Path(manifest_path)
    info = json.loads(path.read_text())
    A = read_matrix_market(path.parent / info["matrix"])
    b = read_vector(path.parent / info["rhs"])
    return A, b, info
