"""Sparse storage, permutations, Matrix Market I/O and the dense coarse solver.

Matrices are scalar CSR with sorted, duplicate-free column indices.  Block
structure, when present, is described separately by a :class:`BlockLayout`
so every algorithm stays agnostic to how unknowns are ordered.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    InvalidPermutation,
    MatrixMarketError,
    SingularMatrixError,
)

INDEX_DTYPE = np.int64


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Compressed sparse row matrix with 64-bit values.

    Treated as immutable once built; the scipy view returned by
    :meth:`to_scipy` shares the underlying arrays.
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ro = np.ascontiguousarray(self.row_offsets, dtype=INDEX_DTYPE)
        ci = np.ascontiguousarray(self.col_indices, dtype=INDEX_DTYPE)
        va = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "nrows", int(self.nrows))
        object.__setattr__(self, "ncols", int(self.ncols))
        object.__setattr__(self, "row_offsets", ro)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", va)
        self._check()

    def _check(self):
        ro, ci = self.row_offsets, self.col_indices
        if self.nrows < 0 or self.ncols < 0:
            raise ValueError("negative dimension")
        if ro.shape != (self.nrows + 1,):
            raise ValueError("row_offsets must have length nrows + 1")
        if ro[0] != 0 or ro[-1] != ci.size or ci.size != self.values.size:
            raise ValueError("row_offsets inconsistent with stored entries")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if ci.size:
            if ci.min() < 0 or ci.max() >= self.ncols:
                raise ValueError("column index out of range")
            # strictly increasing inside a row; row starts are exempt
            step = np.diff(ci)
            starts = np.zeros(ci.size, dtype=bool)
            starts[ro[:-1][np.diff(ro) > 0]] = True
            if np.any((step <= 0) & ~starts[1:]):
                raise ValueError("column indices must be strictly increasing within each row")

    # construction ---------------------------------------------------------

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        m = sp.csr_matrix(m, dtype=np.float64, copy=True)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        return cls.from_scipy(sp.csr_matrix(a))

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    # views ----------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        m = sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=self.shape,
            copy=False,
        )
        m.has_sorted_indices = True
        return m

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def with_values(self, values) -> "SparseMatrix":
        """Same pattern, new values."""
        return SparseMatrix(self.nrows, self.ncols, self.row_offsets, self.col_indices, values)

    def same_pattern(self, other: "SparseMatrix") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
        )

    def __matmul__(self, x):
        return spmv(self, x)

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


class Ordering(enum.Enum):
    CELL_INTERLEAVED = "cell-interleaved"
    VARIABLE_SEGREGATED = "variable-segregated"


@dataclass(frozen=True)
class BlockLayout:
    """How ``ncells * block_size`` unknowns are laid out.

    Pressure is local unknown 0 of each cell; local unknowns 1..block_size-1
    are the component concentrations.
    """

    ncells: int
    block_size: int
    ordering: Ordering = Ordering.CELL_INTERLEAVED

    def __post_init__(self):
        if self.ncells < 0 or self.block_size < 1:
            raise ValueError("invalid block layout")

    @property
    def n(self) -> int:
        return self.ncells * self.block_size

    def variable_indices(self, var: int) -> np.ndarray:
        """Global indices of local unknown ``var`` for every cell, in cell order."""
        if not 0 <= var < self.block_size:
            raise IndexError(var)
        cells = np.arange(self.ncells, dtype=INDEX_DTYPE)
        if self.ordering is Ordering.CELL_INTERLEAVED:
            return cells * self.block_size + var
        return cells + var * self.ncells

    def pressure_indices(self) -> np.ndarray:
        return self.variable_indices(0)

    def concentration_indices(self) -> np.ndarray:
        """Concentration unknowns ordered cell by cell (interleaved within a cell)."""
        if self.block_size == 1:
            return np.empty(0, dtype=INDEX_DTYPE)
        cols = [self.variable_indices(k) for k in range(1, self.block_size)]
        return np.stack(cols, axis=1).reshape(-1)

    def to_interleaved(self) -> np.ndarray:
        """Permutation mapping this layout onto the cell-interleaved one.

        ``permute(A, layout.to_interleaved())`` yields the interleaved matrix.
        """
        cols = [self.variable_indices(k) for k in range(self.block_size)]
        return np.stack(cols, axis=1).reshape(-1)

    def interleaved(self) -> "BlockLayout":
        return BlockLayout(self.ncells, self.block_size, Ordering.CELL_INTERLEAVED)

    def segregated(self) -> "BlockLayout":
        return BlockLayout(self.ncells, self.block_size, Ordering.VARIABLE_SEGREGATED)


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """Row-wise product ``A @ x``.

    Each output entry is accumulated by one row in column order, so the
    result does not depend on threading.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.ncols:
        raise DimensionMismatch(f"vector of length {x.shape} for matrix {A.shape}")
    return A.to_scipy() @ x


def transpose_pattern(A: SparseMatrix) -> SparseMatrix:
    """Transpose, carrying values."""
    return SparseMatrix.from_scipy(A.to_scipy().transpose().tocsr())


def _check_perm(perm, n: int) -> np.ndarray:
    perm = np.asarray(perm)
    if perm.shape != (n,) or not np.issubdtype(perm.dtype, np.integer):
        raise InvalidPermutation(f"permutation must be {n} integers")
    seen = np.zeros(n, dtype=bool)
    if n and (perm.min() < 0 or perm.max() >= n):
        raise InvalidPermutation("permutation entry out of range")
    seen[perm] = True
    if not seen.all():
        raise InvalidPermutation("permutation is not a bijection")
    return perm.astype(INDEX_DTYPE)


def inverse_permutation(perm) -> np.ndarray:
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size, dtype=perm.dtype)
    return inv


def permute(A: SparseMatrix, perm) -> SparseMatrix:
    """Symmetric renumbering: entry ``(i, j)`` of the result is ``A[perm[i], perm[j]]``."""
    if A.nrows != A.ncols:
        raise DimensionMismatch("permute needs a square matrix")
    perm = _check_perm(perm, A.nrows)
    m = A.to_scipy()[perm][:, perm]
    return SparseMatrix.from_scipy(m)


def permute_vec(x, perm) -> np.ndarray:
    return np.asarray(x)[np.asarray(perm)]


def submatrix(A: SparseMatrix, rows, cols=None) -> SparseMatrix:
    cols = rows if cols is None else cols
    return SparseMatrix.from_scipy(A.to_scipy()[np.asarray(rows)][:, np.asarray(cols)])


# Matrix Market -------------------------------------------------------------

_MM_BANNER = "%%matrixmarket"


def read_matrix_market(path) -> SparseMatrix:
    """Read a real coordinate Matrix Market file.

    Symmetric files are expanded to full storage.  Duplicate entries are an
    error rather than being summed.
    """
    with open(path, "r") as fh:
        header = fh.readline()
        parts = header.strip().lower().split()
        if len(parts) != 5 or parts[0] != _MM_BANNER:
            raise MatrixMarketError(f"bad banner: {header.strip()!r}")
        _, obj, fmt, field, symmetry = parts
        if obj != "matrix" or fmt != "coordinate":
            raise MatrixMarketError("only 'matrix coordinate' files are supported")
        if field not in ("real", "integer", "double"):
            raise MatrixMarketError(f"unsupported field {field!r}")
        if symmetry not in ("general", "symmetric"):
            raise MatrixMarketError(f"unsupported symmetry {symmetry!r}")

        line = fh.readline()
        while line and (line.startswith("%") or not line.strip()):
            line = fh.readline()
        try:
            nrows, ncols, nnz = (int(t) for t in line.split())
        except ValueError:
            raise MatrixMarketError(f"bad size line: {line.strip()!r}") from None

        rows = np.empty(nnz, dtype=INDEX_DTYPE)
        cols = np.empty(nnz, dtype=INDEX_DTYPE)
        vals = np.empty(nnz, dtype=np.float64)
        k = 0
        for line in fh:
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            if k >= nnz:
                raise MatrixMarketError("more entries than declared")
            tok = s.split()
            if len(tok) != 3:
                raise MatrixMarketError(f"bad entry line: {s!r}")
            try:
                rows[k], cols[k], vals[k] = int(tok[0]) - 1, int(tok[1]) - 1, float(tok[2])
            except ValueError:
                raise MatrixMarketError(f"bad entry line: {s!r}") from None
            k += 1
    if k != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {k}")
    if nnz and (rows.min() < 0 or cols.min() < 0 or rows.max() >= nrows or cols.max() >= ncols):
        raise MatrixMarketError("index out of range")

    if symmetry == "symmetric":
        if nrows != ncols:
            raise MatrixMarketError("symmetric matrix must be square")
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )

    key = rows * max(ncols, 1) + cols
    if np.unique(key).size != key.size:
        raise MatrixMarketError("duplicate entries")
    m = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)).tocsr()
    return SparseMatrix.from_scipy(m)


def write_matrix_market(A: SparseMatrix, path, comment: str | None = None) -> None:
    """Write ``A`` as a general coordinate file with 17 significant digits."""
    rows = np.repeat(np.arange(A.nrows), np.diff(A.row_offsets))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{A.nrows} {A.ncols} {A.nnz}\n")
        for i, j, v in zip(rows, A.col_indices, A.values):
            fh.write(f"{i + 1} {j + 1} {v:.17g}\n")


def read_vector(path) -> np.ndarray:
    """Plain text vector, one value per line; ``%`` and ``#`` start comments."""
    vals = []
    for line in Path(path).read_text().splitlines():
        s = line.strip()
        if not s or s[0] in "%#":
            continue
        vals.append(float(s))
    return np.array(vals, dtype=np.float64)


def write_vector(x, path) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(x, dtype=np.float64):
            fh.write(f"{v:.17g}\n")


# dense coarse solve ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DenseFactorization:
    """LU factors with partial pivoting, as returned by LAPACK getrf."""

    n: int
    lu: np.ndarray
    piv: np.ndarray

    def solve(self, b) -> np.ndarray:
        return dense_solve(self, b)


def dense_factorize(A) -> DenseFactorization:
    a = A.toarray() if isinstance(A, SparseMatrix) else np.array(A, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch("dense_factorize needs a square matrix")
    n = a.shape[0]
    if n == 0:
        return DenseFactorization(0, a, np.zeros(0, dtype=np.int32))
    scale = np.abs(a).max()
    if scale == 0:
        raise SingularMatrixError("zero matrix", index=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(a, check_finite=True, overwrite_a=True)
    # pivots below n*eps*max|A| are indistinguishable from zero
    pivots = np.abs(np.diag(lu))
    bad = np.flatnonzero(pivots <= n * np.finfo(float).eps * scale)
    if bad.size:
        raise SingularMatrixError(f"singular matrix: zero pivot at row {bad[0]}", index=int(bad[0]))
    return DenseFactorization(n, lu, piv)


def dense_solve(F: DenseFactorization, b) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != F.n:
        raise DimensionMismatch(f"rhs of length {b.shape[0]} for system of size {F.n}")
    if F.n == 0:
        return b.copy()
    return la.lu_solve((F.lu, F.piv), b, check_finite=False)
