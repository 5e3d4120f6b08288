"""Reduction pipelines between ISIS and S|LWE>.

* S|LWE> oracles are unitaries on (sample Z_q^m) x (answer Z_q^n) x work
  registers.  Their diagonal gamma_{s,s} is the norm of the answer = s
  branch of U |psi_s>|0>|0...>, i.e. a real nonnegative number.
* :func:`forward_isis` turns a symmetric S|LWE> oracle into an ISIS solver
  and computes the exact success probability for a syndrome y.
* IC|LWE> oracles are represented by their net family {W'_y}.
  :func:`reverse_slwe` measures |psi'_s> = append_syndrome(|psi_s>) in the
  basis B_s = q^{-n/2} sum_y omega^{s.y} |W'_y>|y>.
* :func:`iclwe_oracle_from_solver` builds {W'_y} from a randomness
  recoverable ISIS solver by running it over all tapes.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from . import isis_solver as iss
from .amplitude import AmplitudeTable, TargetSet, indicator_fourier_family, mass_on, qft_axes
from .config import check_dense
from .errors import InvalidInput, PrecheckFailed, ZeroProbability
from .lattice_states import (
    ZERO_WEIGHT,
    all_w,
    append_syndrome,
    apply_syndrome_map,
    phase_matrix,
    pmax_formula,
    psi_amplitudes,
    sample_register,
    syndrome_indices,
    weights,
)
from .modq import ModMatrix, ModVector, instance_digest
from .seeding import rng_for
from .statevec import (
    Register,
    RegisterLayout,
    StateVector,
    condition,
    controlled_add,
    controlled_map_to_reference,
    qft_register,
    register_distribution,
    shift_register,
)

SYMMETRY_TOL = 1e-9


# --------------------------------------------------------------------------
# S|LWE> oracles


class SlweOracle:
    """Base class.  Subclasses implement ``_apply(state, inverse)``."""

    sample = "sample"
    answer = "answer"

    def __init__(self, A: ModMatrix, f: AmplitudeTable):
        if f.q != A.modulus or f.m != A.cols:
            raise InvalidInput("family does not match A")
        self.A = A
        self.f = f

    @property
    def q(self) -> int:
        return self.A.modulus

    @property
    def work_registers(self) -> tuple[Register, ...]:
        return ()

    def registers(self) -> tuple[Register, ...]:
        return (
            sample_register(self.A, self.sample),
            Register.zq(self.answer, self.q, self.A.rows),
        ) + self.work_registers

    def apply(self, state: StateVector, inverse: bool = False) -> StateVector:
        return self._apply(state, inverse)

    def _apply(self, state: StateVector, inverse: bool) -> StateVector:  # pragma: no cover
        raise NotImplementedError

    def input_state(self, s_index: int) -> StateVector:
        layout = RegisterLayout(self.registers())
        amps = np.zeros(layout.shape, dtype=np.complex128)
        amps[(slice(None),) + (0,) * (len(layout.shape) - 1)] = psi_amplitudes(self.A, self.f, s_index)
        return StateVector(layout, amps)

    def answer_distribution(self, s_index: int) -> np.ndarray:
        return register_distribution(self.apply(self.input_state(s_index)), self.answer)

    @cached_property
    def diagonal(self) -> np.ndarray:
        """|gamma_{s,s}| for every s (index order)."""
        N = self.q**self.A.rows
        return np.array([math.sqrt(self.answer_distribution(s)[s]) for s in range(N)])

    def mean_success(self) -> float:
        return float(np.mean(self.diagonal**2))

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        d = self.diagonal
        return bool(np.max(d) - np.min(d) <= tol)


class PgmOracle(SlweOracle):
    """Pretty good measurement as a unitary on the sample and answer registers:
    append the syndrome, rotate each W_y to |0...0> (controlled on y), then
    inverse QFT on the answer register.  Empty fibers get the identity."""

    def __init__(self, A: ModMatrix, f: AmplitudeTable):
        super().__init__(A, f)
        self.W, self.w, self.active = all_w(A, f)

    def _apply(self, state, inverse):
        if not inverse:
            st = apply_syndrome_map(self.A, state, self.sample, self.answer)
            st = controlled_map_to_reference(st, self.answer, self.sample, self.W, self.active)
            return qft_register(st, self.answer, "inverse")
        st = qft_register(state, self.answer, "forward")
        st = controlled_map_to_reference(st, self.answer, self.sample, self.W, self.active, inverse=True)
        return apply_syndrome_map(self.A, st, self.sample, self.answer, inverse=True)


def pgm_oracle(A: ModMatrix, f: AmplitudeTable) -> PgmOracle:
    return PgmOracle(A, f)


class GuessOracle(SlweOracle):
    """Ignores the sample and adds a fixed guess g to the answer register.

    It is correct exactly on s = g, so its mean success is q^{-n}.  With the
    default g = 0 it is the identity map.
    """

    def __init__(self, A: ModMatrix, f: AmplitudeTable, guess: ModVector | None = None):
        super().__init__(A, f)
        self.guess = guess if guess is not None else ModVector.zeros(A.rows, A.modulus)

    def _apply(self, state, inverse):
        g = (-self.guess).entries if inverse else self.guess.entries
        return shift_register(state, self.answer, g)


class SymmetrizedOracle(SlweOracle):
    """Wraps an oracle so that every diagonal amplitude equals sqrt(p).

    Coherently: prepare a uniform t on a fresh register, shift the sample by
    A^T t (|psi_s> -> |psi_{s+t}>), run the inner oracle, subtract t from the
    answer.
    """

    def __init__(self, inner: SlweOracle):
        super().__init__(inner.A, inner.f)
        self.inner = inner
        self.sample, self.answer = inner.sample, inner.answer
        self.t_name = f"sym_t{len(inner.work_registers)}"

    @property
    def work_registers(self):
        return self.inner.work_registers + (Register.zq(self.t_name, self.q, self.A.rows),)

    def _apply(self, state, inverse):
        At = self.A.entries.T
        eye = np.eye(self.A.rows, dtype=np.int64)
        if not inverse:
            st = qft_register(state, self.t_name, "forward")
            st = controlled_add(st, self.t_name, self.sample, At, +1)
            st = self.inner.apply(st)
            return controlled_add(st, self.t_name, self.answer, eye, -1)
        st = controlled_add(state, self.t_name, self.answer, eye, +1)
        st = self.inner.apply(st, inverse=True)
        st = controlled_add(st, self.t_name, self.sample, At, -1)
        return qft_register(st, self.t_name, "inverse")


def symmetrize(oracle: SlweOracle, A: ModMatrix | None = None) -> SymmetrizedOracle:
    if A is not None and A != oracle.A:
        raise InvalidInput("oracle was built for a different matrix")
    return SymmetrizedOracle(oracle)


# --------------------------------------------------------------------------
# forward direction: S|LWE> oracle -> ISIS


def forward_bound(p: float, eta: float) -> float:
    """p (1 - eta) - 2 sqrt(p (1 - p) eta); may be negative."""
    for name, v in (("p", p), ("eta", eta)):
        if not -1e-12 <= v <= 1 + 1e-12:
            raise InvalidInput(f"{name} = {v} outside [0, 1]")
    p = min(max(p, 0.0), 1.0)
    eta = min(max(eta, 0.0), 1.0)
    return p * (1 - eta) - 2 * math.sqrt(p * (1 - p) * eta)


@dataclass
class ForwardResult:
    y: list[int]
    p_prime: float
    p_post: float
    sample: list[int] | None
    attempts: int | None = None
    elapsed: float = field(default=0.0, compare=False)


def forward_isis(A: ModMatrix, T: TargetSet, f: AmplitudeTable, oracle: SlweOracle,
                 y: ModVector, rng: np.random.Generator | None = None) -> ForwardResult:
    """Run the oracle-based ISIS procedure for syndrome y with exact
    conditioning; returns the probability that the output lies in
    {x in T : A x = y}.

    With ``rng`` the repeat-until-success loop is also simulated: each
    attempt measures the third register, succeeding with probability
    ``p_post``; after ceil(20 / p_post) failures the run errors out.  The
    surviving state is the same on every successful attempt, so one sample
    is then drawn from it."""
    t0 = time.perf_counter()
    if oracle.A != A:
        raise InvalidInput("oracle was built for a different matrix")
    if not oracle.is_symmetric():
        raise InvalidInput("oracle is not symmetric; wrap it with symmetrize()")
    q, n, m = A.modulus, A.rows, A.cols
    N = q**n
    third = Register.zq("third", q, n)
    layout = RegisterLayout(oracle.registers() + (third,))
    amps = np.zeros(layout.shape, dtype=np.complex128)
    phases = np.conj(phase_matrix(q, n)[y.index()])  # omega^{-y.s}
    zero = (0,) * (len(layout.shape) - 2)
    for s in range(N):
        amps[(slice(None),) + zero + (s,)] = phases[s] * psi_amplitudes(A, f, s) / math.sqrt(N)
    st = StateVector(layout, amps)

    st = oracle.apply(st)
    st = controlled_add(st, oracle.answer, "third", np.eye(n, dtype=np.int64), -1)
    try:
        p_post, st = condition(st, "third", 0, drop=True)
    except ZeroProbability:
        raise ZeroProbability("post-selection on the third register has probability 0") from None
    st = oracle.apply(st, inverse=True)
    st = qft_register(st, oracle.sample, "forward")

    dist = register_distribution(st, oracle.sample)
    good = (syndrome_indices(A) == y.index()) & T.mask(q, m)
    p_prime = float(dist[good].sum())
    sample = attempts = None
    if rng is not None:
        cap = math.ceil(20 / p_post)
        attempts = 1
        while rng.random() >= p_post:
            attempts += 1
            if attempts > cap:
                raise ZeroProbability(f"no success on the third register after {cap} attempts")
        x_idx = int(rng.choice(dist.size, p=dist / dist.sum()))
        sample = ModVector.from_index(x_idx, m, q).tolist()
    return ForwardResult(y.tolist(), p_prime, p_post, sample, attempts, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# reports


@dataclass
class ReductionReport:
    kind: str
    digest: str
    seed: int | None
    mean_success: float
    bound: float
    margin: float
    p: float | None = None
    eta: float | None = None
    epsilon: float | None = None
    epsilon_prime: float | None = None
    gamma: float | None = None
    p_max: float | None = None
    per_y: list[float] = field(default_factory=list)
    per_s: list[float] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def body(self) -> dict:
        d = asdict(self)
        d.pop("timings")
        return d


def forward_all(A: ModMatrix, T: TargetSet, f: AmplitudeTable, oracle: SlweOracle,
                seed: int | None = None) -> ReductionReport:
    """Run :func:`forward_isis` for every y and compare with the bound."""
    t0 = time.perf_counter()
    q, n = A.modulus, A.rows
    p = oracle.mean_success()
    eta = max(0.0, 1.0 - mass_on(f.dual, T))
    results = []
    for yi in range(q**n):
        rng = rng_for(seed, "forward", yi) if seed is not None else None
        results.append(forward_isis(A, T, f, oracle, ModVector.from_index(yi, n, q), rng))
    per_y = [r.p_prime for r in results]
    mean = float(np.mean(per_y))
    b = forward_bound(p, eta)
    post_err = max(abs(r.p_post - p) for r in results)
    return ReductionReport(
        kind="forward",
        digest=instance_digest(A),
        seed=seed,
        mean_success=mean,
        bound=b,
        margin=mean - b,
        p=p,
        eta=eta,
        p_max=pmax_formula(A, f),
        per_y=per_y,
        extra={
            "post_selection_max_error": post_err,
            "diagonal_spread": float(np.ptp(oracle.diagonal)),
            "samples": [r.sample for r in results] if seed is not None else None,
            "attempts": [r.attempts for r in results] if seed is not None else None,
        },
        timings={"total_s": time.perf_counter() - t0, "per_y_s": [r.elapsed for r in results]},
    )


# --------------------------------------------------------------------------
# IC|LWE> oracles and the reverse direction


@dataclass(eq=False)
class IclweOracle:
    """Net action |y>|0> -> |y>|W'_y> as a stack of vectors (one row per y).

    With ``has_bottom`` each row has one extra trailing entry for the abort
    symbol.  ``overlaps[y] = <W'_y|W_y>`` (0 where W_y does not exist).
    """

    A: ModMatrix
    vectors: np.ndarray
    has_bottom: bool
    overlaps: np.ndarray
    label: str = ""
    audits: list | None = None

    @property
    def fidelities(self) -> np.ndarray:
        return np.abs(self.overlaps)

    @property
    def gamma(self) -> float:
        return float(np.mean(self.fidelities))

    @property
    def epsilon_prime(self) -> float:
        return 1.0 - self.gamma


def _overlaps(A: ModMatrix, f: AmplitudeTable, vectors: np.ndarray) -> np.ndarray:
    W, _, active = all_w(A, f)
    core = vectors[:, : W.shape[1]]
    ov = np.einsum("yd,yd->y", np.conj(core), W)
    ov[~active] = 0.0
    return ov


def perfect_iclwe_oracle(A: ModMatrix, f: AmplitudeTable) -> IclweOracle:
    """W'_y = W_y; empty fibers get |0...0> (and fidelity 0 by convention)."""
    W, _, active = all_w(A, f)
    V = W.copy()
    V[~active, 0] = 1.0
    return IclweOracle(A, V, False, _overlaps(A, f, V), label="perfect")


def _binary_position_index(x: np.ndarray, q: int) -> int:
    v = 0
    for b in x.tolist():
        v = v * q + int(b)
    return v


def iclwe_oracle_from_solver(A: ModMatrix, solver=iss.solve, recoverer=iss.recover,
                             params: iss.SolverParams | None = None) -> IclweOracle:
    """IC|LWE> oracle for f with fhat = 1_{Z_2^m}, from a recoverable solver.

    For every y the solver is run on all tapes.  Before anything is built,
    each output must give back its tape (abort outputs carry it, solutions go
    through ``recoverer``); otherwise the uncomputation step is invalid and
    :class:`PrecheckFailed` is raised.  Then

        Fourier side of W'_y = 2^{-l/2} sum_r |A(y; r)>,

    with every abort collapsed into the single bottom slot, and W'_y is its
    inverse QFT (bottom untouched).
    """
    params = params or iss.SolverParams.from_matrix(A)
    q, n, m = A.modulus, A.rows, A.cols
    ell = params.tape_length
    check_dense(2**ell, "tape enumeration")
    check_dense(q**m, "oracle vectors")
    N = 2**ell
    f = indicator_fourier_family(TargetSet.binary(), q, m)
    V = np.zeros((q**n, q**m + 1), dtype=np.complex128)
    audits = []
    for yi in range(q**n):
        y = ModVector.from_index(yi, n, q)
        outputs = [solver(A, y, iss.SolverTape.from_int(r, ell)) for r in range(N)]
        counts = np.zeros(q**m + 1)
        for r, out in enumerate(outputs):
            tape = iss.SolverTape.from_int(r, ell)
            if isinstance(out, iss.Abort):
                if out.tape != tape:
                    raise PrecheckFailed(f"abort output for y={y.tolist()} does not carry its tape")
                counts[-1] += 1
                continue
            try:
                back = recoverer(A, y, out.x)
            except Exception as exc:
                raise PrecheckFailed(f"recovery failed for y={y.tolist()}, tape {tape.to_hex()}: {exc}") from exc
            if back != tape:
                raise PrecheckFailed(f"recovery mismatch for y={y.tolist()}, tape {tape.to_hex()}")
            counts[_binary_position_index(out.x.entries, q)] += 1
        if counts[:-1].max(initial=0) > 1:
            raise PrecheckFailed(f"solver is not injective for y={y.tolist()}")
        vhat = np.sqrt(counts / N).astype(np.complex128)
        if abs(np.linalg.norm(vhat) - 1.0) > 1e-12:
            raise PrecheckFailed("tape superposition is not a unit vector")
        core = qft_axes(vhat[:-1].reshape((q,) * m), axes=tuple(range(m)), inverse=True)
        V[yi, :-1] = core.reshape(-1)
        V[yi, -1] = vhat[-1]
        audits.append(iss.audit_outputs(A, y, outputs))
    return IclweOracle(A, V, True, _overlaps(A, f, V), label="solver", audits=audits)


def always_abort_solver(A: ModMatrix, y: ModVector, tape: iss.SolverTape) -> iss.Abort:
    """Stub solver that never answers (trivially randomness recoverable)."""
    return iss.Abort(iss.SolverTape(tape.bits), 0, "stub")


def reverse_bound(eps: float, eps_prime: float) -> tuple[float, float]:
    """((1 - e - e' - 2 sqrt(e e'))^2 clamped at 0, raw inner term)."""
    for name, v in (("eps", eps), ("eps_prime", eps_prime)):
        if not -1e-12 <= v <= 1 + 1e-12:
            raise InvalidInput(f"{name} = {v} outside [0, 1]")
    eps = min(max(eps, 0.0), 1.0)
    eps_prime = min(max(eps_prime, 0.0), 1.0)
    inner = 1 - eps - eps_prime - 2 * math.sqrt(eps * eps_prime)
    return (max(inner, 0.0) ** 2, inner)


@dataclass
class ReverseResult:
    s: list[int]
    success_amplitude: float
    distribution: np.ndarray
    residual: float
    predicted_amplitude: float


def reverse_slwe(A: ModMatrix, f: AmplitudeTable, oracle: IclweOracle, s: ModVector) -> ReverseResult:
    """Measure append_syndrome(|psi_s>) in the {B_s'} basis built from the oracle."""
    q, n, m = A.modulus, A.rows, A.cols
    if oracle.A != A:
        raise InvalidInput("oracle was built for a different matrix")
    N = q**n
    psi = StateVector.single(sample_register(A), psi_amplitudes(A, f, s.index()))
    psi2 = append_syndrome(A, psi).amplitudes  # (q^m, q^n)
    core = oracle.vectors[:, : q**m]
    M = np.einsum("yd,dy->y", np.conj(core), psi2)  # <W'_y | psi'_s(., y)>
    P = phase_matrix(q, n)
    amps = (np.conj(P) @ M) / math.sqrt(N)  # row s': sum_y omega^{-s'.y} M[y]
    dist = np.abs(amps) ** 2
    w = weights(A, f)
    predicted = abs(np.sum(np.sqrt(np.maximum(w, 0.0) / N) * oracle.overlaps)) / N
    return ReverseResult(s.tolist(), float(abs(amps[s.index()])), dist,
                         float(max(0.0, 1.0 - dist.sum())), float(predicted))


def reverse_all(A: ModMatrix, f: AmplitudeTable, oracle: IclweOracle,
                seed: int | None = None) -> ReductionReport:
    t0 = time.perf_counter()
    q, n = A.modulus, A.rows
    res = [reverse_slwe(A, f, oracle, ModVector.from_index(si, n, q)) for si in range(q**n)]
    per_s = [r.success_amplitude**2 for r in res]
    mean = float(np.mean(per_s))
    w = weights(A, f)
    mean_sqrt = float(np.mean(np.sqrt(np.maximum(w, 0.0) / q**n)))
    eps = max(0.0, 1.0 - mean_sqrt)
    eps_p = max(0.0, oracle.epsilon_prime)
    bound, raw = reverse_bound(eps, eps_p)
    extra = {
        "bound_inner": raw,
        "max_identity_error": max(abs(r.success_amplitude - r.predicted_amplitude) for r in res),
        "residual_mass": [r.residual for r in res],
        "oracle": oracle.label,
    }
    if oracle.audits is not None:
        extra["epsilon_solver"] = float(np.mean([a.epsilon for a in oracle.audits]))
        extra["fidelity_gap"] = float(max(abs(g - a.fidelity) for g, a in zip(oracle.fidelities, oracle.audits)))
        extra["gamma_y"] = oracle.fidelities.tolist()
        extra["audits"] = [a.to_dict() for a in oracle.audits]
    return ReductionReport(
        kind="reverse",
        digest=instance_digest(A),
        seed=seed,
        mean_success=mean,
        bound=bound,
        margin=mean - bound,
        epsilon=eps,
        epsilon_prime=eps_p,
        gamma=oracle.gamma,
        p_max=mean_sqrt**2,
        per_s=per_s,
        extra=extra,
        timings={"total_s": time.perf_counter() - t0},
    )


def sample_solver_matrix(params: iss.SolverParams, seed: int, max_tries: int = 1000):
    """Uniform A from the seeded stream, resampled until the solver's first
    rank check passes.  Returns (A, number of rejected draws)."""
    for k in range(max_tries):
        rng = rng_for(seed, "solver-matrix", k)
        A = ModMatrix(rng.integers(0, params.q, size=(params.n, params.m)), params.q)
        if iss.top_blocks_full_rank(A):
            return A, k
    raise PrecheckFailed("no matrix passing the rank check was drawn")


def end_to_end(params: iss.SolverParams, seed: int, solver=iss.solve, recoverer=iss.recover,
               A: ModMatrix | None = None) -> ReductionReport:
    """Solver -> IC|LWE> oracle -> S|LWE> algorithm for f with fhat = 1_{Z_2^m}."""
    t0 = time.perf_counter()
    rejected = 0
    if A is None:
        A, rejected = sample_solver_matrix(params, seed)
    f = indicator_fourier_family(TargetSet.binary(), params.q, params.m)
    oracle = iclwe_oracle_from_solver(A, solver, recoverer, params)
    t1 = time.perf_counter()
    rep = reverse_all(A, f, oracle, seed)
    rep.kind = "end-to-end"
    rep.extra["params"] = params.to_dict()
    rep.extra["rejected_matrices"] = rejected
    rep.extra["A"] = A.tolist()
    rep.extra["upper_margin"] = rep.p_max - rep.mean_success
    rep.timings = {"oracle_s": t1 - t0, "reverse_s": time.perf_counter() - t1,
                   "total_s": time.perf_counter() - t0}
    return rep
