"""Modular linear algebra over Z_q and GF(2).

Values are stored as residues ``0..q-1`` in read-only int64 arrays.  The
signed representatives ``-floor(q/2) .. floor((q-1)/2)`` are only produced by
:func:`canonical_lift`, for display and norm computations.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import InvalidInput


def _frozen_residues(entries, q: int, ndim: int) -> np.ndarray:
    if int(q) < 2:
        raise InvalidInput(f"modulus must be >= 2, got {q}")
    arr = np.array(entries, dtype=np.int64)
    if ndim == 2 and arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != ndim:
        raise InvalidInput(f"expected a {ndim}-d array, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= q):
        raise InvalidInput(f"entries must lie in [0, {q})")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModMatrix:
    """Integer matrix with entries reduced modulo ``modulus``."""

    entries: np.ndarray
    modulus: int

    def __post_init__(self):
        object.__setattr__(self, "modulus", int(self.modulus))
        object.__setattr__(self, "entries", _frozen_residues(self.entries, self.modulus, 2))

    @classmethod
    def reduce(cls, entries, modulus: int) -> "ModMatrix":
        """Build from arbitrary integers by reducing them mod ``modulus``."""
        return cls(np.mod(np.asarray(entries, dtype=np.int64), modulus), modulus)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def mod(self, modulus: int) -> "ModMatrix":
        return ModMatrix.reduce(self.entries, modulus)

    def lift(self) -> np.ndarray:
        return canonical_lift(self.entries, self.modulus)

    def tolist(self) -> list[list[int]]:
        return self.entries.tolist()

    def __eq__(self, other):
        if not isinstance(other, ModMatrix):
            return NotImplemented
        return self.modulus == other.modulus and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.modulus, self.entries.shape, self.entries.tobytes()))

    def __repr__(self):
        return f"ModMatrix({self.entries.tolist()}, q={self.modulus})"


@dataclass(frozen=True, eq=False)
class ModVector:
    """Integer vector with entries reduced modulo ``modulus``."""

    entries: np.ndarray
    modulus: int

    def __post_init__(self):
        object.__setattr__(self, "modulus", int(self.modulus))
        object.__setattr__(self, "entries", _frozen_residues(self.entries, self.modulus, 1))

    @classmethod
    def reduce(cls, entries, modulus: int) -> "ModVector":
        return cls(np.mod(np.asarray(entries, dtype=np.int64), modulus), modulus)

    @classmethod
    def zeros(cls, length: int, modulus: int) -> "ModVector":
        return cls(np.zeros(length, dtype=np.int64), modulus)

    def __len__(self):
        return self.entries.shape[0]

    def mod(self, modulus: int) -> "ModVector":
        return ModVector.reduce(self.entries, modulus)

    def lift(self) -> np.ndarray:
        return canonical_lift(self.entries, self.modulus)

    def tolist(self) -> list[int]:
        return self.entries.tolist()

    def index(self) -> int:
        """Mixed-radix index, coordinate 0 most significant."""
        v = 0
        for e in self.entries.tolist():
            v = v * self.modulus + e
        return v

    @classmethod
    def from_index(cls, index: int, length: int, modulus: int) -> "ModVector":
        return cls(index_to_digits(index, length, modulus), modulus)

    def __add__(self, other: "ModVector") -> "ModVector":
        _same_modulus(self, other)
        return ModVector.reduce(self.entries + other.entries, self.modulus)

    def __sub__(self, other: "ModVector") -> "ModVector":
        _same_modulus(self, other)
        return ModVector.reduce(self.entries - other.entries, self.modulus)

    def __neg__(self) -> "ModVector":
        return ModVector.reduce(-self.entries, self.modulus)

    def __eq__(self, other):
        if not isinstance(other, ModVector):
            return NotImplemented
        return self.modulus == other.modulus and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.modulus, self.entries.tobytes()))

    def __repr__(self):
        return f"ModVector({self.entries.tolist()}, q={self.modulus})"


def _same_modulus(a, b) -> None:
    if a.modulus != b.modulus:
        raise InvalidInput(f"modulus mismatch: {a.modulus} vs {b.modulus}")


def canonical_lift(residues, q: int) -> np.ndarray:
    """Map residues to the signed range {-floor(q/2), ..., floor((q-1)/2)}."""
    r = np.asarray(residues, dtype=np.int64)
    return np.where(r > (q - 1) // 2, r - q, r)


def index_to_digits(index: int, length: int, radix: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.int64)
    for j in range(length - 1, -1, -1):
        index, out[j] = divmod(index, radix)
    if index:
        raise InvalidInput("index out of range")
    return out


def digits_table(length: int, radix: int) -> np.ndarray:
    """All vectors of {0..radix-1}^length as rows, in mixed-radix index order."""
    idx = np.arange(radix**length, dtype=np.int64)
    place = radix ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // place[None, :]) % radix


def mat_vec_mul(A: ModMatrix, x: ModVector) -> ModVector:
    _same_modulus(A, x)
    if A.cols != len(x):
        raise InvalidInput(f"shape mismatch: {A.shape} times vector of length {len(x)}")
    return ModVector.reduce(A.entries @ x.entries, A.modulus)


def mat_mul(A: ModMatrix, B: ModMatrix) -> ModMatrix:
    _same_modulus(A, B)
    if A.cols != B.rows:
        raise InvalidInput(f"shape mismatch: {A.shape} times {B.shape}")
    return ModMatrix.reduce(A.entries @ B.entries, A.modulus)


def transpose_mul(A: ModMatrix, s: ModVector) -> ModVector:
    """A^T s mod q."""
    _same_modulus(A, s)
    if A.rows != len(s):
        raise InvalidInput("shape mismatch for A^T s")
    return ModVector.reduce(s.entries @ A.entries, A.modulus)


# --------------------------------------------------------------------------
# GF(2)


class AffineSolution(NamedTuple):
    particular: ModVector
    kernel_basis: list[ModVector]


def _require_gf2(M: ModMatrix) -> None:
    if M.modulus != 2:
        raise InvalidInput(f"expected a GF(2) matrix, got modulus {M.modulus}")


def gf2_rank_array(M: np.ndarray) -> int:
    """Rank over GF(2) of a 0/1 integer array (no validation)."""
    M = np.asarray(M)
    if M.size == 0:
        return 0
    _, piv = kernels.gf2_rref(kernels.pack_bits(M), M.shape[1])
    return int(piv.size)


def gf2_solve_array(M: np.ndarray, t: np.ndarray):
    """Solve M x = t over GF(2) for 0/1 arrays.

    Returns ``(particular, kernel_rows)`` as int64 arrays or ``None`` when the
    system is inconsistent.  Kernel vectors are listed by ascending free column.
    """
    M = np.asarray(M, dtype=np.int64)
    r, c = M.shape
    aug = np.concatenate([M & 1, (np.asarray(t, dtype=np.int64) & 1)[:, None]], axis=1)
    red, piv = kernels.gf2_rref(kernels.pack_bits(aug), c)
    dense = kernels.unpack_bits(red, c + 1)
    rank = piv.size
    if rank < r and dense[rank:, c].any():
        return None
    x = np.zeros(c, dtype=np.int64)
    x[piv] = dense[:rank, c]
    free = np.setdiff1d(np.arange(c), piv)
    kernel = np.zeros((free.size, c), dtype=np.int64)
    for k, f in enumerate(free):
        kernel[k, f] = 1
        kernel[k, piv] = dense[:rank, f]
    return x, kernel


def rank_gf2(M: ModMatrix) -> int:
    _require_gf2(M)
    return gf2_rank_array(M.entries)


def solve_affine_gf2(M: ModMatrix, t: ModVector) -> AffineSolution | None:
    """Affine solution set of M x = t over GF(2), or ``None`` if empty."""
    _require_gf2(M)
    _same_modulus(M, t)
    if M.rows != len(t):
        raise InvalidInput(f"shape mismatch: {M.shape} vs target of length {len(t)}")
    res = gf2_solve_array(M.entries, t.entries)
    if res is None:
        return None
    x, kernel = res
    return AffineSolution(ModVector(x, 2), [ModVector(k, 2) for k in kernel])


def _extend_rows(A: np.ndarray, target_rank: int) -> np.ndarray:
    """Append unit rows e_0, e_1, ... that increase the rank until target_rank."""
    rows = [row for row in A]
    rank = gf2_rank_array(A) if A.size else 0
    cols = A.shape[1]
    i = 0
    while rank < target_rank:
        e = np.zeros(cols, dtype=np.int64)
        e[i] = 1
        new_rank = gf2_rank_array(np.array(rows + [e]))
        if new_rank > rank:
            rows.append(e)
            rank = new_rank
        i += 1
    return np.array(rows, dtype=np.int64).reshape(-1, cols)


def _check_full_row_rank(A: ModMatrix) -> None:
    if rank_gf2(A) != A.rows:
        raise InvalidInput("matrix does not have full row rank over GF(2)")


def extend_full_rank_p1(A: ModMatrix, target_rank: int) -> ModMatrix:
    """Deterministically append unit rows to a full-row-rank GF(2) matrix.

    Unit rows are tried in index order and kept only when they raise the rank;
    the result has rank ``target_rank`` and starts with the rows of ``A``.
    """
    _require_gf2(A)
    _check_full_row_rank(A)
    if not A.rows <= target_rank <= A.cols:
        raise InvalidInput(f"target rank {target_rank} outside [{A.rows}, {A.cols}]")
    return ModMatrix(_extend_rows(A.entries, target_rank), 2)


def extend_to_invertible_p2(A: ModMatrix) -> ModMatrix:
    """Rows B such that A stacked over B is invertible (n x (2n+1) input)."""
    _require_gf2(A)
    n = A.rows
    if A.cols != 2 * n + 1:
        raise InvalidInput(f"expected an n x (2n+1) matrix, got {A.shape}")
    _check_full_row_rank(A)
    full = _extend_rows(A.entries, A.cols)
    return ModMatrix(full[n:], 2)


def block_split(A: ModMatrix, width: int) -> list[ModMatrix]:
    if width <= 0 or A.cols % width:
        raise InvalidInput(f"block width {width} does not divide {A.cols} columns")
    return [ModMatrix(A.entries[:, k : k + width], A.modulus) for k in range(0, A.cols, width)]


# --------------------------------------------------------------------------
# prime-modulus elimination (used for fiber enumeration when q is prime)


def solve_affine_mod_prime(M: np.ndarray, t: np.ndarray, p: int):
    """Solve M x = t over GF(p).  Returns (particular, kernel_rows) or None."""
    M = np.mod(np.asarray(M, dtype=np.int64), p)
    r, c = M.shape
    aug = np.concatenate([M, np.mod(np.asarray(t, dtype=np.int64), p)[:, None]], axis=1)
    piv_cols = []
    row = 0
    for col in range(c):
        nz = np.flatnonzero(aug[row:, col]) if row < r else np.array([], dtype=np.int64)
        if nz.size == 0:
            continue
        k = row + int(nz[0])
        aug[[row, k]] = aug[[k, row]]
        aug[row] = (aug[row] * pow(int(aug[row, col]), -1, p)) % p
        others = np.arange(r) != row
        aug[others] = (aug[others] - np.outer(aug[others, col], aug[row])) % p
        piv_cols.append(col)
        row += 1
        if row == r:
            break
    rank = len(piv_cols)
    if rank < r and aug[rank:, c].any():
        return None
    x = np.zeros(c, dtype=np.int64)
    x[piv_cols] = aug[:rank, c]
    free = [j for j in range(c) if j not in piv_cols]
    kernel = np.zeros((len(free), c), dtype=np.int64)
    for k, f in enumerate(free):
        kernel[k, f] = 1
        kernel[k, piv_cols] = (-aug[:rank, f]) % p
    return x, kernel


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    return all(q % d for d in range(2, int(q**0.5) + 1))


# --------------------------------------------------------------------------
# instance files


@dataclass(frozen=True)
class Instance:
    A: ModMatrix
    y: ModVector | None = None

    @property
    def q(self) -> int:
        return self.A.modulus

    @property
    def n(self) -> int:
        return self.A.rows

    @property
    def m(self) -> int:
        return self.A.cols

    def to_dict(self) -> dict:
        d = {"q": self.q, "n": self.n, "m": self.m, "A": self.A.tolist()}
        if self.y is not None:
            d["y"] = self.y.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        try:
            q, n, m = int(d["q"]), int(d["n"]), int(d["m"])
            A_raw = np.array(d["A"], dtype=np.int64)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed instance: {exc}") from exc
        if A_raw.shape != (n, m):
            raise InvalidInput(f"A has shape {A_raw.shape}, expected {(n, m)}")
        if A_raw.size and (A_raw.min() < 0 or A_raw.max() >= q):
            bad = np.argwhere((A_raw < 0) | (A_raw >= q))[0]
            raise InvalidInput(f"A[{bad[0]}][{bad[1]}] = {A_raw[tuple(bad)]} is not in [0, {q})")
        y = None
        if d.get("y") is not None:
            y_raw = np.array(d["y"], dtype=np.int64)
            if y_raw.shape != (n,):
                raise InvalidInput(f"y has shape {y_raw.shape}, expected ({n},)")
            if y_raw.size and (y_raw.min() < 0 or y_raw.max() >= q):
                raise InvalidInput(f"y entries must lie in [0, {q})")
            y = ModVector(y_raw, q)
        return cls(ModMatrix(A_raw, q), y)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def load_instance(path) -> Instance:
    with open(path) as fh:
        try:
            return Instance.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: not valid JSON ({exc})") from exc


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(inst.dumps())


def instance_digest(A: ModMatrix, y: ModVector | None = None) -> str:
    """Short stable fingerprint of an instance (first 16 hex digits of SHA-256)."""
    return hashlib.sha256(Instance(A, y).dumps().encode("ascii")).hexdigest()[:16]
