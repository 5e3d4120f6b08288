"""Hot loops, each in two flavours: a numba ``@njit`` loop and a vectorized
numpy version.  The module-level names dispatch to numba unless it is missing
or ``RDL_DISABLE_NUMBA`` is set.

Conventions shared with the rest of the package:

* GF(2) matrices are packed row-wise into ``uint64`` words; column ``j`` lives
  in word ``j // 64`` at bit ``j % 64``.
* Vectors over ``{0..r-1}^m`` are indexed mixed-radix with coordinate 0 the
  most significant digit.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

_ONE = np.uint64(1)


def pack_bits(M) -> np.ndarray:
    """Pack a 0/1 matrix (rows x cols) into uint64 words."""
    M = np.asarray(M, dtype=np.uint64) & _ONE
    r, c = M.shape
    words = max(1, (c + 63) // 64)
    out = np.zeros((r, words), dtype=np.uint64)
    for j in range(c):
        out[:, j >> 6] |= M[:, j] << np.uint64(j & 63)
    return out


def unpack_bits(words: np.ndarray, ncols: int) -> np.ndarray:
    words = np.asarray(words, dtype=np.uint64)
    out = np.zeros((words.shape[0], ncols), dtype=np.int64)
    for j in range(ncols):
        out[:, j] = (words[:, j >> 6] >> np.uint64(j & 63)) & _ONE
    return out


# --------------------------------------------------------------------------
# GF(2) reduced row echelon form


def _gf2_rref_loop(words, ncols):
    a = words.copy()
    r = a.shape[0]
    w = a.shape[1]
    pivots = np.empty(min(r, ncols), dtype=np.int64)
    rank = 0
    for c in range(ncols):
        if rank == r:
            break
        wi = c >> 6
        bit = np.uint64(1) << np.uint64(c & 63)
        piv = -1
        for i in range(rank, r):
            if (a[i, wi] & bit) != 0:
                piv = i
                break
        if piv < 0:
            continue
        if piv != rank:
            for k in range(w):
                tmp = a[piv, k]
                a[piv, k] = a[rank, k]
                a[rank, k] = tmp
        for i in range(r):
            if i != rank and (a[i, wi] & bit) != 0:
                for k in range(w):
                    a[i, k] ^= a[rank, k]
        pivots[rank] = c
        rank += 1
    return a, pivots[:rank].copy()


_gf2_rref_nb = njit(_gf2_rref_loop)


def _gf2_rref_np(words, ncols):
    a = np.array(words, dtype=np.uint64, copy=True)
    r = a.shape[0]
    pivots = []
    rank = 0
    for c in range(ncols):
        if rank == r:
            break
        wi, sh = c >> 6, np.uint64(c & 63)
        col = ((a[:, wi] >> sh) & _ONE).astype(bool)
        below = np.flatnonzero(col[rank:])
        if below.size == 0:
            continue
        piv = rank + int(below[0])
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
            col[[rank, piv]] = col[[piv, rank]]
        col[rank] = False
        a[col] ^= a[rank]
        pivots.append(c)
        rank += 1
    return a, np.array(pivots, dtype=np.int64)


# --------------------------------------------------------------------------
# Syndrome tables: index of A x mod q for every x in {0..radix-1}^m


def _syndrome_table_loop(A, q, radix):
    n = A.shape[0]
    m = A.shape[1]
    total = 1
    for _ in range(m):
        total *= radix
    out = np.empty(total, dtype=np.int64)
    digits = np.zeros(m, dtype=np.int64)
    syn = np.zeros(n, dtype=np.int64)
    for idx in range(total):
        v = 0
        for i in range(n):
            v = v * q + syn[i]
        out[idx] = v
        j = m - 1
        while j >= 0:
            if digits[j] + 1 < radix:
                digits[j] += 1
                for i in range(n):
                    syn[i] = (syn[i] + A[i, j]) % q
                break
            # wrap this digit back to zero and carry
            for i in range(n):
                syn[i] = (syn[i] - (radix - 1) * A[i, j]) % q
            digits[j] = 0
            j -= 1
    return out


_syndrome_table_nb = njit(_syndrome_table_loop)


def _syndrome_table_np(A, q, radix, chunk=1 << 16):
    A = np.asarray(A, dtype=np.int64)
    n, m = A.shape
    total = radix**m
    place = radix ** np.arange(m - 1, -1, -1, dtype=np.int64)
    out_place = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    out = np.empty(total, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        syn = np.zeros((idx.size, n), dtype=np.int64)
        for j in range(m):
            d = (idx // place[j]) % radix
            syn += d[:, None] * A[:, j][None, :]
        out[start : start + idx.size] = (syn % q) @ out_place
    return out


# --------------------------------------------------------------------------
# dispatch

IMPLEMENTATIONS = {
    "gf2_rref": {"numba": _gf2_rref_nb, "numpy": _gf2_rref_np},
    "syndrome_table": {"numba": _syndrome_table_nb, "numpy": _syndrome_table_np},
}

BACKEND = "numba" if USE_NUMBA else "numpy"


def gf2_rref(words: np.ndarray, ncols: int):
    """Reduced row echelon form of a packed GF(2) matrix.

    Returns ``(reduced_words, pivot_columns)``; the rank is ``len(pivots)``.
    """
    words = np.ascontiguousarray(words, dtype=np.uint64)
    return IMPLEMENTATIONS["gf2_rref"][BACKEND](words, int(ncols))


def syndrome_table(A, q: int, radix: int | None = None) -> np.ndarray:
    """For every x in {0..radix-1}^m, the mixed-radix index of A x mod q.

    ``radix`` defaults to ``q`` (all of Z_q^m); ``radix=2`` gives the binary
    candidates used by the ISIS solver audits.
    """
    A = np.ascontiguousarray(A, dtype=np.int64)
    r = int(q if radix is None else radix)
    return IMPLEMENTATIONS["syndrome_table"][BACKEND](A, int(q), r)
