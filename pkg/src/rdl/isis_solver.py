"""Recursive ISIS solver over Z_q, q = 2^l, m = (2n+1)^l, T = {0,1}^m, that
reads its randomness from an explicit tape and can recover that tape from
its output.

Tape layout (consumption order), per recursion level from the top:

* shares y_1 .. y_{m'-1}: n bits each, coordinate 0 first;
* pads u_1 .. u_{m'}: n bits each, in block order;
* then the tape of the reduced instance.

At the bottom level (q = 2) the tape holds the n+1 bits of u, coordinate 0
first.  A non-aborting run consumes exactly m - n l bits.

Each block yields two solutions x1 < x2 (lexicographic, coordinate 0 most
significant).  The offset z_i = x2 - x1 is kept *signed*, entries in
{-1, 0, 1}: then x_i + z_i x'_i is again a 0/1 vector and A Z is still even,
so the merged solution x + Z x' stays binary.  The reduced instance
A' = A Z / 2, y' = (y - A x) / 2 is solved modulo q/2.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import check_dense
from .errors import InvalidInput, NotReachable
from .modq import ModMatrix, ModVector, _extend_rows, gf2_rank_array, gf2_solve_array
from .seeding import rng_for


@dataclass(frozen=True)
class SolverParams:
    n: int
    l: int

    def __post_init__(self):
        if self.n < 1 or self.l < 1:
            raise InvalidInput(f"need n >= 1 and l >= 1, got n={self.n}, l={self.l}")

    @property
    def q(self) -> int:
        return 2**self.l

    @property
    def m(self) -> int:
        return (2 * self.n + 1) ** self.l

    @property
    def tape_length(self) -> int:
        return self.m - self.n * self.l

    @classmethod
    def from_matrix(cls, A: ModMatrix) -> "SolverParams":
        q, n, m = A.modulus, A.rows, A.cols
        l = q.bit_length() - 1
        if q != 2**l or l < 1:
            raise InvalidInput(f"modulus {q} is not a power of two")
        if m != (2 * n + 1) ** l:
            raise InvalidInput(f"m = {m} but (2n+1)^l = {(2 * n + 1) ** l}")
        return cls(n, l)

    def to_dict(self) -> dict:
        return {"n": self.n, "l": self.l, "q": self.q, "m": self.m, "tape_length": self.tape_length}


def tape_length(params: SolverParams) -> int:
    return params.tape_length


@dataclass(frozen=True, eq=False)
class SolverTape:
    bits: np.ndarray
    cursor: int = 0

    def __post_init__(self):
        b = np.array(self.bits, dtype=np.uint8).reshape(-1)
        if b.size and b.max() > 1:
            raise InvalidInput("tape bits must be 0/1")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)
        if not 0 <= self.cursor <= b.size:
            raise InvalidInput("tape cursor out of range")

    def __len__(self):
        return self.bits.size

    def __eq__(self, other):
        if not isinstance(other, SolverTape):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __repr__(self):
        return f"SolverTape({''.join(map(str, self.bits.tolist()))!r}, cursor={self.cursor})"

    def to_int(self) -> int:
        v = 0
        for b in self.bits.tolist():
            v = 2 * v + b
        return v

    @classmethod
    def from_int(cls, value: int, length: int) -> "SolverTape":
        if not 0 <= value < 2**length:
            raise InvalidInput(f"tape value {value} does not fit in {length} bits")
        return cls([(value >> (length - 1 - k)) & 1 for k in range(length)])

    def to_hex(self) -> str:
        """First bit most significant, zero-padded to ceil(len/4) digits."""
        width = (len(self) + 3) // 4
        return format(self.to_int(), "x").zfill(width) if width else ""

    @classmethod
    def from_hex(cls, text: str, length: int) -> "SolverTape":
        text = text.strip().lower().removeprefix("0x")
        try:
            value = int(text, 16) if text else 0
        except ValueError as exc:
            raise InvalidInput(f"not a hex tape: {text!r}") from exc
        return cls.from_int(value, length)

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "SolverTape":
        return cls(rng.integers(0, 2, size=length))


@dataclass(frozen=True)
class Solution:
    x: ModVector
    consumed: int


@dataclass(frozen=True)
class Abort:
    tape: SolverTape
    level: int = 0
    reason: str = ""


SolverOutput = Solution | Abort


@dataclass
class LevelTrace:
    q: int
    A: np.ndarray
    y: np.ndarray
    shares: np.ndarray | None = None
    pads: np.ndarray | None = None
    extended: list[np.ndarray] = field(default_factory=list)
    block_solutions: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    z: list[np.ndarray] = field(default_factory=list)
    x: np.ndarray | None = None
    A_next: np.ndarray | None = None
    y_next: np.ndarray | None = None


class _Aborted(Exception):
    def __init__(self, level: int, reason: str):
        super().__init__(reason)
        self.level = level
        self.reason = reason


class _Reader:
    def __init__(self, bits: np.ndarray):
        self.bits = bits.astype(np.int64)
        self.pos = 0

    def take(self, k: int) -> np.ndarray:
        if self.pos + k > self.bits.size:
            raise InvalidInput("tape exhausted")
        out = self.bits[self.pos : self.pos + k]
        self.pos += k
        return out


def _lex_key(v: np.ndarray) -> tuple:
    return tuple(v.tolist())


def _block_pair(At: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The two solutions of At x = t over GF(2), At of rank cols - 1, sorted."""
    res = gf2_solve_array(At, t)
    if res is None or res[1].shape[0] != 1:
        raise AssertionError("extended block must have a one-dimensional kernel")
    x0, ker = res
    x1 = x0 ^ ker[0]
    return (x0, x1) if _lex_key(x0) <= _lex_key(x1) else (x1, x0)


def _blocks_full_rank(A2: np.ndarray, n: int) -> bool:
    w = 2 * n + 1
    return all(gf2_rank_array(A2[:, k : k + w]) == n for k in range(0, A2.shape[1], w))


def _solve_level(A: np.ndarray, y: np.ndarray, q: int, n: int, reader: _Reader,
                 trace: list | None, depth: int) -> np.ndarray:
    A2, y2 = A % 2, y % 2
    rec = LevelTrace(q, A.copy(), y.copy()) if trace is not None else None
    if trace is not None:
        trace.append(rec)
    if q == 2:
        if gf2_rank_array(A2) != n:
            raise _Aborted(depth, "bottom matrix not of full rank")
        full = _extend_rows(A2, 2 * n + 1)
        u = reader.take(n + 1)
        res = gf2_solve_array(full, np.concatenate([y2, u]))
        x = res[0]
        if rec is not None:
            rec.pads, rec.extended, rec.x = u.copy(), [full], x
        return x

    w = 2 * n + 1
    mp = A.shape[1] // w
    if not _blocks_full_rank(A2, n):
        raise _Aborted(depth, "block not of full rank")
    shares = reader.take(n * (mp - 1)).reshape(mp - 1, n)
    last = (y2 - shares.sum(axis=0)) % 2
    ys = np.vstack([shares, last[None, :]])
    pads = reader.take(n * mp).reshape(mp, n)

    x = np.zeros(A.shape[1], dtype=np.int64)
    Z = np.zeros((A.shape[1], mp), dtype=np.int64)
    for i in range(mp):
        cols = slice(i * w, (i + 1) * w)
        At = _extend_rows(A2[:, cols], 2 * n)
        x1, x2 = _block_pair(At, np.concatenate([ys[i], pads[i]]))
        x[cols] = x1
        Z[cols, i] = x2 - x1
        if rec is not None:
            rec.extended.append(At)
            rec.block_solutions.append((x1, x2))
            rec.z.append(x2 - x1)

    AZ = A @ Z
    assert not (AZ % 2).any(), "A Z must vanish mod 2"
    h = q // 2
    A_next = (AZ // 2) % h
    r = (y - A @ x) % q
    assert not (r % 2).any()
    y_next = (r // 2) % h
    if rec is not None:
        rec.shares, rec.pads, rec.x = ys, pads, x
        rec.A_next, rec.y_next = A_next, y_next
    x_next = _solve_level(A_next, y_next, h, n, reader, trace, depth + 1)
    return x + Z @ x_next


def _check_instance(A: ModMatrix, y: ModVector) -> SolverParams:
    params = SolverParams.from_matrix(A)
    if len(y) != A.rows or y.modulus != A.modulus:
        raise InvalidInput("y does not match A")
    return params


def solve(A: ModMatrix, y: ModVector, tape: SolverTape, trace: list | None = None) -> SolverOutput:
    """Run the solver on an explicit tape.

    Returns ``Solution`` (binary x with A x = y mod q) or ``Abort`` carrying
    the untouched input tape.  Pass a list as ``trace`` to collect one
    :class:`LevelTrace` per recursion level.
    """
    params = _check_instance(A, y)
    if len(tape) != params.tape_length:
        raise InvalidInput(f"tape has {len(tape)} bits, expected {params.tape_length}")
    reader = _Reader(tape.bits)
    try:
        x = _solve_level(A.entries, y.entries, A.modulus, A.rows, reader, trace, 0)
    except _Aborted as ab:
        return Abort(SolverTape(tape.bits), ab.level, ab.reason)
    assert reader.pos == len(tape), "non-aborting run must consume the whole tape"
    assert ((x == 0) | (x == 1)).all()
    return Solution(ModVector(x, A.modulus), reader.pos)


def _recover_level(A: np.ndarray, y: np.ndarray, xF: np.ndarray, q: int, n: int) -> list[np.ndarray]:
    A2 = A % 2
    if q == 2:
        if gf2_rank_array(A2) != n:
            raise NotReachable("bottom matrix is not of full rank, solver aborts here")
        full = _extend_rows(A2, 2 * n + 1)
        return [(full[n:] @ xF) % 2]
    w = 2 * n + 1
    mp = A.shape[1] // w
    if not _blocks_full_rank(A2, n):
        raise NotReachable("a block is not of full rank, solver aborts here")
    ys, pads = [], []
    x = np.zeros_like(xF)
    Z = np.zeros((A.shape[1], mp), dtype=np.int64)
    x_next = np.zeros(mp, dtype=np.int64)
    for i in range(mp):
        cols = slice(i * w, (i + 1) * w)
        At = _extend_rows(A2[:, cols], 2 * n)
        t = (At @ xF[cols]) % 2
        ys.append(t[:n])
        pads.append(t[n:])
        x1, x2 = _block_pair(At, t)
        x[cols] = x1
        Z[cols, i] = x2 - x1
        if np.array_equal(xF[cols], x2):
            x_next[i] = 1
        elif not np.array_equal(xF[cols], x1):
            raise AssertionError("block of x_F is not one of its two block solutions")
    h = q // 2
    A_next = ((A @ Z) // 2) % h
    y_next = (((y - A @ x) % q) // 2) % h
    rest = _recover_level(A_next, y_next, x_next, h, n)
    return ys[:-1] + pads + rest


def recover(A: ModMatrix, y: ModVector, x_F: ModVector) -> SolverTape:
    """The unique tape r with solve(A, y, r) = x_F."""
    params = _check_instance(A, y)
    x = np.asarray(x_F.entries, dtype=np.int64)
    if x.size != params.m or not ((x == 0) | (x == 1)).all():
        raise InvalidInput("x_F must be a 0/1 vector of length m")
    if not np.array_equal((A.entries @ x) % A.modulus, y.entries):
        raise InvalidInput("x_F does not satisfy A x_F = y mod q")
    parts = _recover_level(A.entries, y.entries, x, A.modulus, A.rows)
    bits = np.concatenate([np.asarray(p, dtype=np.int64).reshape(-1) for p in parts])
    return SolverTape(bits, cursor=bits.size)


# --------------------------------------------------------------------------
# brute-force audits


def binary_syndromes(A: ModMatrix) -> np.ndarray:
    """Syndrome index of every x in {0,1}^m, in lexicographic order."""
    check_dense(2**A.cols, "binary candidate table")
    return kernels.syndrome_table(A.entries, A.modulus, 2)


def _bits_of(indices: np.ndarray, m: int) -> np.ndarray:
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    return (np.asarray(indices, dtype=np.int64)[:, None] >> shifts[None, :]) & 1


def enumerate_solutions(A: ModMatrix, y: ModVector) -> list[ModVector]:
    """All x in {0,1}^m with A x = y mod q, lexicographically sorted."""
    idx = np.flatnonzero(binary_syndromes(A) == y.index())
    return [ModVector(b, A.modulus) for b in _bits_of(idx, A.cols)]


def solution_indices(A: ModMatrix, y: ModVector) -> np.ndarray:
    """Binary solutions as integers (coordinate 0 = most significant bit)."""
    return np.flatnonzero(binary_syndromes(A) == y.index())


def bits_to_index(x) -> int:
    v = 0
    for b in np.asarray(getattr(x, "entries", x)).tolist():
        v = 2 * v + int(b)
    return v


def all_tape_outputs(A: ModMatrix, y: ModVector, solver=solve) -> list[SolverOutput]:
    """Solver output for every tape, in tape-integer order."""
    params = SolverParams.from_matrix(A)
    ell = params.tape_length
    check_dense(2**ell, "tape enumeration")
    return [solver(A, y, SolverTape.from_int(r, ell)) for r in range(2**ell)]


@dataclass(frozen=True)
class AuditResult:
    y: ModVector
    epsilon: float
    fidelity: float
    coverage: float
    p_abort: float
    n_solutions: int
    n_tapes: int

    def to_dict(self) -> dict:
        return {
            "y": self.y.tolist(),
            "epsilon": self.epsilon,
            "fidelity": self.fidelity,
            "coverage": self.coverage,
            "p_abort": self.p_abort,
            "n_solutions": self.n_solutions,
            "n_tapes": self.n_tapes,
        }


def output_distribution(outputs: list[SolverOutput]) -> tuple[Counter, int]:
    """Counts per solution index and the number of aborts."""
    counts: Counter = Counter()
    aborts = 0
    for out in outputs:
        if isinstance(out, Abort):
            aborts += 1
        else:
            counts[bits_to_index(out.x)] += 1
    return counts, aborts


def audit_outputs(A: ModMatrix, y: ModVector, outputs: list[SolverOutput]) -> AuditResult:
    """Audit an exhaustive list of solver outputs (one per tape)."""
    N = len(outputs)
    counts, aborts = output_distribution(outputs)
    sols = set(solution_indices(A, y).tolist())
    k = len(sols)
    if k == 0:
        # no binary solution: u_y undefined; the solver can only abort
        return AuditResult(y, 1.0, 0.0, 0.0, aborts / N, 0, N)
    u = 1.0 / k
    tv = aborts / N
    fid = 0.0
    for x in sorted(sols):
        p = counts.get(x, 0) / N
        tv += abs(p - u)
        fid += math.sqrt(p * u)
    tv += sum(c for x, c in counts.items() if x not in sols) / N
    coverage = sum(1 for x in sols if counts.get(x, 0)) / k
    return AuditResult(y, 0.5 * tv, fid, coverage, aborts / N, k, N)


def uniformity_audit(A: ModMatrix, y: ModVector, solver=solve) -> AuditResult:
    """Compare the exact output law p_y (abort = one extra atom) with the
    uniform law u_y on binary solutions: total variation, classical fidelity
    sum sqrt(p u), and the fraction of solutions ever produced."""
    return audit_outputs(A, y, all_tape_outputs(A, y, solver))


# --------------------------------------------------------------------------
# abort rates


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials <= 0:
        raise InvalidInput("trials must be >= 1")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class AbortEstimate:
    rate: float
    ci95: tuple[float, float]
    trials: int
    aborts: int
    exact: float | None

    def to_dict(self) -> dict:
        return {"rate": self.rate, "ci95": list(self.ci95), "trials": self.trials,
                "aborts": self.aborts, "exact": self.exact}


def random_instance(params: SolverParams, rng: np.random.Generator) -> tuple[ModMatrix, ModVector]:
    A = ModMatrix(rng.integers(0, params.q, size=(params.n, params.m)), params.q)
    y = ModVector(rng.integers(0, params.q, size=params.n), params.q)
    return A, y


def top_blocks_full_rank(A: ModMatrix) -> bool:
    """Whether the first level of the solver gets past its rank check."""
    n = A.rows
    A2 = A.entries % 2
    if A.modulus == 2:
        return gf2_rank_array(A2) == n
    return _blocks_full_rank(A2, n)


def abort_probability(params: SolverParams, trials: int, seed: int) -> AbortEstimate:
    """Monte-Carlo abort rate over uniform (A, y, tape) with a Wilson 95% CI."""
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    aborts = 0
    for k in range(trials):
        rng = rng_for(seed, "abort-rate", k)
        A, y = random_instance(params, rng)
        tape = SolverTape.random(params.tape_length, rng)
        if isinstance(solve(A, y, tape), Abort):
            aborts += 1
    return AbortEstimate(aborts / trials, wilson_interval(aborts, trials), trials, aborts,
                         exact_abort_probability(params))


def full_rank_fraction(n: int) -> float:
    """Probability that a uniform n x (2n+1) GF(2) matrix has rank n."""
    return math.prod(1 - 2.0 ** (i - (2 * n + 1)) for i in range(n))


def exact_abort_probability(params: SolverParams) -> float | None:
    """Exact abort probability over uniform (A, y, tape), where available.

    l = 1: one rank test.  l = 2, n = 1: the top-level blocks must be of full
    rank, and then the solver aborts at the bottom iff the reduced 1 x 3
    matrix vanishes mod 2.  Each reduced entry depends only on its own block
    (mod 4) and that block's (share, pad) pair, which are uniform and
    independent, so the bottom abort probability is pi^3 with pi the chance a
    single block's reduced entry is even.
    """
    n, l = params.n, params.l
    if l == 1:
        return 1.0 - full_rank_fraction(n)
    if l == 2 and n == 1:
        ok_top = full_rank_fraction(1) ** 3
        zero, total = 0, 0
        for a in range(64):
            Ai = np.array([(a >> 4) & 3, (a >> 2) & 3, a & 3])
            if not (Ai % 2).any():
                continue
            At = _extend_rows((Ai % 2)[None, :], 2)
            for t in range(4):
                x1, x2 = _block_pair(At, np.array([t >> 1, t & 1]))
                total += 1
                zero += int((Ai @ (x2 - x1)) // 2 % 2 == 0)
        pi = zero / total
        return 1.0 - ok_top + ok_top * pi**3
    return None
