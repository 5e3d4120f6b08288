from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdl import isis_solver as iss
from rdl import reductions as red
from rdl.amplitude import TargetSet, delta_family, indicator_fourier_family, random_family, uniform_family
from rdl.errors import InvalidInput, PrecheckFailed
from rdl.lattice_states import pmax_formula, weights
from rdl.modq import ModMatrix, ModVector
from rdl.statevec import RegisterLayout, StateVector


def operator_matrix(oracle: red.SlweOracle, inverse=False) -> np.ndarray:
    layout = RegisterLayout(oracle.registers())
    cols = []
    for i in range(layout.dim):
        e = np.zeros(layout.dim, dtype=complex)
        e[i] = 1
        cols.append(oracle.apply(StateVector(layout, e), inverse=inverse).flat)
    return np.array(cols).T


def rand_instance(seed, q, n, m):
    rng = np.random.default_rng(seed)
    return ModMatrix(rng.integers(0, q, size=(n, m)), q), random_family(q, m, rng)


small = st.tuples(st.sampled_from([2, 3]), st.integers(1, 2), st.integers(1, 3)).filter(
    lambda t: t[2] >= t[1])


# ---------------------------------------------------------------- oracles


@given(small, st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_pgm_oracle_unitary_and_matches_formula(inst, seed):
    q, n, m = inst
    A, f = rand_instance(seed, q, n, m)
    o = red.pgm_oracle(A, f)
    U = operator_matrix(o)
    assert np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-10)
    assert np.allclose(operator_matrix(o, inverse=True) @ U, np.eye(U.shape[0]), atol=1e-10)
    assert o.mean_success() == pytest.approx(pmax_formula(A, f), abs=1e-9)
    assert o.is_symmetric()
    assert np.allclose(o.diagonal, np.mean(np.sqrt(weights(A, f) / q**n)), atol=1e-9)


def test_pgm_oracle_examples():
    A = ModMatrix([[1, 0, 1], [0, 1, 1]], 2)
    o = red.pgm_oracle(A, delta_family(2, 3))  # fhat uniform, full rank
    for s in range(4):
        assert o.answer_distribution(s)[s] == pytest.approx(1.0, abs=1e-9)
    o = red.pgm_oracle(A, uniform_family(2, 3))
    assert o.mean_success() == pytest.approx(0.25, abs=1e-9)


def test_symmetrized_guess_oracle():
    A = ModMatrix([[1, 1]], 2)
    f = delta_family(2, 2)
    g = red.GuessOracle(A, f)
    assert g.diagonal.tolist() == [1.0, 0.0]
    sym = red.symmetrize(g)
    assert np.allclose(sym.diagonal, [math.sqrt(0.5)] * 2, atol=1e-9)
    U = operator_matrix(sym)
    assert np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-10)
    with pytest.raises(InvalidInput):
        red.forward_isis(A, TargetSet.binary(), f, g, ModVector([0], 2))


def test_symmetrizing_symmetric_oracle_is_fixed_point():
    A, f = rand_instance(1, 3, 1, 2)
    o = red.pgm_oracle(A, f)
    assert np.allclose(red.symmetrize(o).diagonal, o.diagonal, atol=1e-9)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=10)
def test_symmetrized_diagonal_is_rms_of_original(seed):
    rng = np.random.default_rng(seed)
    q = 3
    A = ModMatrix(rng.integers(0, q, size=(1, 2)), q)
    f = random_family(q, 2, rng)
    g = red.GuessOracle(A, f, ModVector([int(rng.integers(q))], q))
    sym = red.symmetrize(g)
    assert np.ptp(sym.diagonal) < 1e-9
    assert sym.diagonal[0] == pytest.approx(math.sqrt(np.mean(g.diagonal**2)), abs=1e-9)


# ---------------------------------------------------------------- bounds


def test_forward_bound_examples():
    assert red.forward_bound(1, 0) == 1
    assert red.forward_bound(1, 0.3) == pytest.approx(0.7)
    assert red.forward_bound(0.5, 0.1) == pytest.approx(0.45 - 2 * math.sqrt(0.025))
    assert red.forward_bound(0.5, 0.1) == pytest.approx(0.133772, abs=1e-6)
    with pytest.raises(InvalidInput):
        red.forward_bound(1.5, 0)


def test_reverse_bound_examples():
    assert red.reverse_bound(0, 0)[0] == 1
    assert red.reverse_bound(0.2, 0)[0] == pytest.approx(0.64)
    # (1 - 0.05 - 2 * 0.02)^2 = 0.91^2
    assert red.reverse_bound(0.01, 0.04)[0] == pytest.approx(0.8281)
    b, raw = red.reverse_bound(0.6, 0.6)
    assert b == 0.0 and raw < 0


# ---------------------------------------------------------------- forward pipeline


def test_forward_whole_space_gives_one():
    rng = np.random.default_rng(2)
    q, n, m = 3, 1, 3
    A = ModMatrix(rng.integers(1, q, size=(n, m)), q)
    f = indicator_fourier_family(TargetSet.linf(q), q, m)
    rep = red.forward_all(A, TargetSet.linf(q), f, red.pgm_oracle(A, f))
    assert np.allclose(rep.per_y, 1.0, atol=1e-9)


def test_forward_perfect_case_matches_fiber_count():
    # fhat = 1_T / sqrt|T| with A equidistributed on T makes the PGM oracle perfect
    q, n, m = 4, 1, 3
    T = TargetSet.binary()
    mask = T.mask(q, m)
    pts = np.array(np.unravel_index(np.flatnonzero(mask), (q,) * m)).T
    rng = np.random.default_rng(0)
    while True:
        A = ModMatrix(rng.integers(0, q, size=(n, m)), q)
        counts = np.bincount((pts @ A.entries[0]) % q, minlength=q)
        if len(set(counts.tolist())) == 1:
            break
    f = indicator_fourier_family(T, q, m)
    o = red.pgm_oracle(A, f)
    assert o.mean_success() == pytest.approx(1.0, abs=1e-9)
    for yi in range(q):
        res = red.forward_isis(A, T, f, o, ModVector([yi], q))
        assert res.p_prime == pytest.approx(q**n * counts[yi] / mask.sum(), abs=1e-9)


@given(small, st.integers(0, 2**32 - 1), st.sampled_from(["binary", "linf1"]))
@settings(max_examples=15)
def test_forward_bound_holds(inst, seed, tkind):
    q, n, m = inst
    A, f = rand_instance(seed, q, n, m)
    T = TargetSet.binary() if tkind == "binary" else TargetSet.linf(1)
    rep = red.forward_all(A, T, f, red.pgm_oracle(A, f))
    assert rep.mean_success >= rep.bound - 1e-7
    assert rep.extra["post_selection_max_error"] < 1e-9


def test_forward_sampling_is_seeded():
    A, f = rand_instance(3, 3, 1, 2)
    o = red.pgm_oracle(A, f)
    a = red.forward_all(A, TargetSet.binary(), f, o, seed=5)
    b = red.forward_all(A, TargetSet.binary(), f, o, seed=5)
    assert a.extra["samples"] == b.extra["samples"]
    assert a.extra["attempts"] == b.extra["attempts"]
    assert all(k >= 1 for k in a.extra["attempts"])


# ---------------------------------------------------------------- reverse pipeline


@given(small, st.integers(0, 2**32 - 1))
@settings(max_examples=15)
def test_reverse_perfect_oracle_hits_pmax(inst, seed):
    q, n, m = inst
    A, f = rand_instance(seed, q, n, m)
    rep = red.reverse_all(A, f, red.perfect_iclwe_oracle(A, f))
    pm = pmax_formula(A, f)
    assert np.allclose(rep.per_s, pm, atol=1e-9)
    assert rep.extra["max_identity_error"] < 1e-9


def test_reverse_zero_errors_gives_one():
    A = ModMatrix([[1, 0, 1], [0, 1, 1]], 2)
    f = delta_family(2, 3)
    rep = red.reverse_all(A, f, red.perfect_iclwe_oracle(A, f))
    assert rep.epsilon == pytest.approx(0, abs=1e-12) and rep.epsilon_prime == pytest.approx(0, abs=1e-12)
    assert rep.mean_success == pytest.approx(1.0, abs=1e-9)


def test_solver_oracle_l1_is_exact():
    A = ModMatrix([[1, 1, 0]], 2)
    o = red.iclwe_oracle_from_solver(A)
    assert np.allclose(o.fidelities, 1.0, atol=1e-12)
    rep = red.end_to_end(iss.SolverParams(1, 1), seed=0, A=A)
    assert rep.mean_success == pytest.approx(1.0, abs=1e-9)


def test_always_abort_stub():
    params = iss.SolverParams(1, 2)
    A, _ = red.sample_solver_matrix(params, 0)
    o = red.iclwe_oracle_from_solver(A, solver=red.always_abort_solver)
    assert np.allclose(o.fidelities, 0.0)
    rep = red.end_to_end(params, seed=0, solver=red.always_abort_solver, A=A)
    assert rep.mean_success <= params.q ** -params.n + 1e-9


def test_non_recoverable_solver_fails_precheck():
    A = ModMatrix([[1, 0, 1]], 2)

    def lossy(A_, y_, tape):
        x = iss.enumerate_solutions(A_, y_)[0]
        return iss.Solution(x, len(tape))

    with pytest.raises(PrecheckFailed):
        red.iclwe_oracle_from_solver(A, solver=lossy)


def test_solver_oracle_l2_fidelity_identity():
    params = iss.SolverParams(1, 2)
    A, _ = red.sample_solver_matrix(params, 11)
    o = red.iclwe_oracle_from_solver(A)
    assert len(o.audits) == 4
    for g, a in zip(o.fidelities, o.audits):
        assert g == pytest.approx(a.fidelity, abs=1e-9)
        assert g >= 1 - a.epsilon - 1e-12
    direct = [iss.uniformity_audit(A, ModVector([y], 4)) for y in range(4)]
    assert [d.to_dict() for d in direct] == [a.to_dict() for a in o.audits]


def test_sample_solver_matrix_is_seeded():
    p = iss.SolverParams(1, 2)
    a, ka = red.sample_solver_matrix(p, 9)
    b, kb = red.sample_solver_matrix(p, 9)
    assert a == b and ka == kb
    assert iss.top_blocks_full_rank(a)
