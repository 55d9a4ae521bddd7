"""Compiled inner loops for relaxation and block factorizations.

All kernels release the GIL so row chunks of one color group can run on
worker threads.  Each row update reads the row in stored column order, so a
row's arithmetic is identical whichever kernel or chunk performs it.
"""
import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def relax_rows(indptr, indices, data, x, b, rows):
    """Gauss-Seidel update of ``x`` in place, visiting ``rows`` in order."""
    for t in range(rows.shape[0]):
        i = rows[t]
        s = b[i]
        d = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if j == i:
                d = data[jj]
            else:
                s -= data[jj] * x[j]
        x[i] = s / d


@njit(**_OPTS)
def jacobi_rows(indptr, indices, data, x_old, x_new, b, omega, rows):
    for t in range(rows.shape[0]):
        i = rows[t]
        s = b[i]
        d = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if j == i:
                d = data[jj]
            else:
                s -= data[jj] * x_old[j]
        if omega == 1.0:
            x_new[i] = s / d
        else:
            x_new[i] = (1.0 - omega) * x_old[i] + omega * (s / d)


# small dense blocks ------------------------------------------------------------

@njit(**_OPTS)
def _invert_block(a, out):
    """Gauss-Jordan inverse with partial pivoting; returns False if singular."""
    n = a.shape[0]
    m = a.copy()
    for i in range(n):
        for j in range(n):
            out[i, j] = 1.0 if i == j else 0.0
    scale = 0.0
    for i in range(n):
        for j in range(n):
            v = abs(m[i, j])
            if v > scale:
                scale = v
    if scale == 0.0:
        return False
    tol = n * 2.220446049250313e-16 * scale
    for k in range(n):
        p = k
        best = abs(m[k, k])
        for i in range(k + 1, n):
            if abs(m[i, k]) > best:
                best = abs(m[i, k])
                p = i
        if best <= tol:
            return False
        if p != k:
            for j in range(n):
                tmp = m[k, j]
                m[k, j] = m[p, j]
                m[p, j] = tmp
                tmp = out[k, j]
                out[k, j] = out[p, j]
                out[p, j] = tmp
        piv = m[k, k]
        for j in range(n):
            m[k, j] /= piv
            out[k, j] /= piv
        for i in range(n):
            if i != k:
                f = m[i, k]
                if f != 0.0:
                    for j in range(n):
                        m[i, j] -= f * m[k, j]
                        out[i, j] -= f * out[k, j]
    return True


@njit(**_OPTS)
def invert_diagonal_blocks(blocks, diag_pos, out):
    """Invert ``blocks[diag_pos[i]]`` into ``out[i]``; returns first failing row or -1."""
    for i in range(diag_pos.shape[0]):
        if diag_pos[i] < 0:
            return i
        if not _invert_block(blocks[diag_pos[i]], out[i]):
            return i
    return -1


@njit(**_OPTS)
def bilu0_factor(indptr, indices, blocks, diag_pos):
    """In-place block ILU(0), IKJ ordering.

    On return strictly-lower blocks hold L (unit diagonal implied), strictly
    upper blocks hold U, and diagonal slots hold inv(U_ii).  Returns the first
    block row with a singular pivot, or -1.
    """
    nb = indptr.shape[0] - 1
    bs = blocks.shape[1]
    marker = np.full(nb, -1, dtype=np.int64)
    tmp = np.empty((bs, bs))
    inv = np.empty((bs, bs))
    for i in range(nb):
        if diag_pos[i] < 0:
            return i
        for jj in range(indptr[i], indptr[i + 1]):
            marker[indices[jj]] = jj
        for kk in range(indptr[i], diag_pos[i]):
            k = indices[kk]
            # L_ik = A_ik * inv(U_kk)
            ukk_inv = blocks[diag_pos[k]]
            for r in range(bs):
                for c in range(bs):
                    s = 0.0
                    for q in range(bs):
                        s += blocks[kk, r, q] * ukk_inv[q, c]
                    tmp[r, c] = s
            blocks[kk, :, :] = tmp
            for kj in range(diag_pos[k] + 1, indptr[k + 1]):
                pos = marker[indices[kj]]
                if pos < 0:
                    continue
                for r in range(bs):
                    for c in range(bs):
                        s = 0.0
                        for q in range(bs):
                            s += tmp[r, q] * blocks[kj, q, c]
                        blocks[pos, r, c] -= s
        if not _invert_block(blocks[diag_pos[i]], inv):
            for jj in range(indptr[i], indptr[i + 1]):
                marker[indices[jj]] = -1
            return i
        blocks[diag_pos[i], :, :] = inv
        for jj in range(indptr[i], indptr[i + 1]):
            marker[indices[jj]] = -1
    return -1


@njit(**_OPTS)
def bilu0_solve(indptr, indices, blocks, diag_pos, r, x):
    """Solve ``L U x = r`` with factors from :func:`bilu0_factor`; r, x are (nb, bs)."""
    nb = indptr.shape[0] - 1
    bs = blocks.shape[1]
    y = np.empty(bs)
    for i in range(nb):
        for c in range(bs):
            y[c] = r[i, c]
        for kk in range(indptr[i], diag_pos[i]):
            k = indices[kk]
            for a in range(bs):
                s = 0.0
                for q in range(bs):
                    s += blocks[kk, a, q] * x[k, q]
                y[a] -= s
        for c in range(bs):
            x[i, c] = y[c]
    for i in range(nb - 1, -1, -1):
        for c in range(bs):
            y[c] = x[i, c]
        for jj in range(diag_pos[i] + 1, indptr[i + 1]):
            j = indices[jj]
            for a in range(bs):
                s = 0.0
                for q in range(bs):
                    s += blocks[jj, a, q] * x[j, q]
                y[a] -= s
        d = blocks[diag_pos[i]]
        for a in range(bs):
            s = 0.0
            for q in range(bs):
                s += d[a, q] * y[q]
            x[i, a] = s


@njit(**_OPTS)
def block_gs_sweep(indptr, indices, blocks, dinv, r, x):
    """One forward block Gauss-Seidel sweep on ``x`` (nb, bs) in place."""
    nb = indptr.shape[0] - 1
    bs = blocks.shape[1]
    y = np.empty(bs)
    for i in range(nb):
        for c in range(bs):
            y[c] = r[i, c]
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if j == i:
                continue
            for a in range(bs):
                s = 0.0
                for q in range(bs):
                    s += blocks[jj, a, q] * x[j, q]
                y[a] -= s
        for a in range(bs):
            s = 0.0
            for q in range(bs):
                s += dinv[i, a, q] * y[q]
            x[i, a] = s
