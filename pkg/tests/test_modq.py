from __future__ import annotations

import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdl.errors import InvalidInput
from rdl.modq import (
    Instance,
    ModMatrix,
    ModVector,
    block_split,
    canonical_lift,
    digits_table,
    extend_full_rank_p1,
    extend_to_invertible_p2,
    gf2_rank_array,
    instance_digest,
    is_prime,
    load_instance,
    mat_mul,
    mat_vec_mul,
    rank_gf2,
    save_instance,
    solve_affine_gf2,
    solve_affine_mod_prime,
    transpose_mul,
)


def brute_rank_gf2(M: np.ndarray) -> int:
    """log2 of the size of the row space, by enumerating all row combinations."""
    r = M.shape[0]
    span = {tuple((np.array(c) @ M) % 2) for c in itertools.product([0, 1], repeat=r)}
    return int(np.log2(len(span)))


def brute_solutions(M: np.ndarray, t: np.ndarray, q: int) -> set[tuple]:
    c = M.shape[1]
    return {x for x in itertools.product(range(q), repeat=c)
            if np.array_equal((M @ np.array(x, dtype=np.int64)) % q, t % q)}


def span_of(particular: np.ndarray, kernel: list, q: int) -> set[tuple]:
    out = set()
    for coef in itertools.product(range(q), repeat=len(kernel)):
        v = particular.copy()
        for a, k in zip(coef, kernel):
            v = v + a * np.asarray(k)
        out.add(tuple(v % q))
    return out


gf2_mats = st.integers(1, 5).flatmap(
    lambda r: st.integers(1, 7).flatmap(
        lambda c: st.lists(st.integers(0, 1), min_size=r * c, max_size=r * c).map(
            lambda v: np.array(v, dtype=np.int64).reshape(r, c))))


# --- arithmetic


def test_mat_vec_examples():
    A = ModMatrix([[1, 0, 1]], 2)
    assert mat_vec_mul(A, ModVector([1, 1, 0], 2)).tolist() == [1]
    rng = np.random.default_rng(0)
    I4 = ModMatrix(np.eye(3, dtype=int), 4)
    x = ModVector(rng.integers(0, 4, 3), 4)
    assert mat_vec_mul(I4, x) == x
    Z = ModMatrix(np.zeros((2, 3), dtype=int), 5)
    assert mat_vec_mul(Z, ModVector([1, 2, 3], 5)).tolist() == [0, 0]


def test_entries_validated_and_readonly():
    with pytest.raises(InvalidInput):
        ModMatrix([[0, 4]], 4)
    with pytest.raises(InvalidInput):
        ModVector([-1], 3)
    with pytest.raises(InvalidInput):
        ModMatrix([[0]], 1)
    A = ModMatrix([[1, 2]], 3)
    with pytest.raises(ValueError):
        A.entries[0, 0] = 0
    assert ModMatrix.reduce([[-1, 7]], 3).tolist() == [[2, 1]]


def test_modulus_mismatch_rejected():
    with pytest.raises(InvalidInput):
        mat_vec_mul(ModMatrix([[1]], 2), ModVector([1], 3))


@given(st.integers(2, 6), st.data())
def test_products_match_integer_arithmetic(q, data):
    n, m = data.draw(st.integers(1, 3)), data.draw(st.integers(1, 4))
    A = np.array(data.draw(st.lists(st.integers(0, q - 1), min_size=n * m, max_size=n * m))).reshape(n, m)
    x = np.array(data.draw(st.lists(st.integers(0, q - 1), min_size=m, max_size=m)))
    s = np.array(data.draw(st.lists(st.integers(0, q - 1), min_size=n, max_size=n)))
    Am = ModMatrix(A, q)
    for i in range(n):
        assert mat_vec_mul(Am, ModVector(x, q)).entries[i] == sum(A[i, j] * x[j] for j in range(m)) % q
    for j in range(m):
        assert transpose_mul(Am, ModVector(s, q)).entries[j] == sum(A[i, j] * s[i] for i in range(n)) % q
    B = ModMatrix(A.T.copy(), q)
    assert np.array_equal(mat_mul(Am, B).entries, (A @ A.T) % q)


@given(st.integers(2, 7), st.integers(0, 4))
def test_vector_index_round_trip(q, length):
    for idx in range(min(q**length, 50)):
        v = ModVector.from_index(idx, length, q)
        assert v.index() == idx
    assert np.array_equal(digits_table(length, q)[-1], np.full(length, q - 1))


def test_canonical_lift_range():
    assert canonical_lift(np.arange(4), 4).tolist() == [0, 1, -2, -1]
    assert canonical_lift(np.arange(5), 5).tolist() == [0, 1, 2, -2, -1]


def test_vector_group_ops():
    a, b = ModVector([1, 2], 3), ModVector([2, 2], 3)
    assert (a + b).tolist() == [0, 1]
    assert (a - b).tolist() == [2, 0]
    assert (-a).tolist() == [2, 1]
    assert a == ModVector([1, 2], 3) and hash(a) == hash(ModVector([1, 2], 3))
    assert a != ModVector([1, 2], 4)


# --- GF(2)


def test_rank_examples():
    assert rank_gf2(ModMatrix([[1, 0, 1], [0, 1, 1]], 2)) == 2
    assert rank_gf2(ModMatrix(np.zeros((2, 3), dtype=int), 2)) == 0
    assert rank_gf2(ModMatrix([[1, 0, 1], [1, 0, 1]], 2)) == 1
    with pytest.raises(InvalidInput):
        rank_gf2(ModMatrix([[1, 2]], 4))


@given(gf2_mats)
def test_rank_matches_row_space_count(M):
    assert gf2_rank_array(M) == brute_rank_gf2(M)


def test_solve_examples():
    sol = solve_affine_gf2(ModMatrix([[1, 0, 1]], 2), ModVector([1], 2))
    assert sol.particular.tolist() == [1, 0, 0]
    assert sorted(k.tolist() for k in sol.kernel_basis) == [[0, 1, 0], [1, 0, 1]]
    got = span_of(sol.particular.entries, [k.entries for k in sol.kernel_basis], 2)
    assert got == brute_solutions(np.array([[1, 0, 1]]), np.array([1]), 2)
    assert len(got) == 4
    assert solve_affine_gf2(ModMatrix([[0, 0, 0]], 2), ModVector([1], 2)) is None
    M = ModMatrix([[1, 1], [0, 1]], 2)
    sol = solve_affine_gf2(M, ModVector([1, 1], 2))
    assert sol.kernel_basis == [] and sol.particular.tolist() == [0, 1]


@given(gf2_mats, st.data())
def test_solve_matches_exhaustive(M, data):
    t = np.array(data.draw(st.lists(st.integers(0, 1), min_size=M.shape[0], max_size=M.shape[0])))
    truth = brute_solutions(M, t, 2)
    sol = solve_affine_gf2(ModMatrix(M, 2), ModVector(t, 2))
    if not truth:
        assert sol is None
        return
    assert len(sol.kernel_basis) == M.shape[1] - brute_rank_gf2(M)
    assert span_of(sol.particular.entries, [k.entries for k in sol.kernel_basis], 2) == truth


@given(st.sampled_from([2, 3, 5, 7]), st.data())
def test_prime_solve_matches_exhaustive(p, data):
    r, c = data.draw(st.integers(1, 2)), data.draw(st.integers(1, 3))
    M = np.array(data.draw(st.lists(st.integers(0, p - 1), min_size=r * c, max_size=r * c))).reshape(r, c)
    t = np.array(data.draw(st.lists(st.integers(0, p - 1), min_size=r, max_size=r)))
    truth = brute_solutions(M, t, p)
    res = solve_affine_mod_prime(M, t, p)
    if not truth:
        assert res is None
    else:
        assert span_of(res[0], list(res[1]), p) == truth


def test_is_prime():
    assert [q for q in range(12) if is_prime(q)] == [2, 3, 5, 7, 11]


# --- P1 / P2 extensions


def test_p1_examples():
    A = ModMatrix([[1, 0, 1]], 2)
    assert extend_full_rank_p1(A, 2).tolist() == [[1, 0, 1], [1, 0, 0]]
    assert extend_full_rank_p1(A, 1) == A
    assert extend_full_rank_p1(ModMatrix([[1, 0, 0]], 2), 2).tolist() == [[1, 0, 0], [0, 1, 0]]
    with pytest.raises(InvalidInput):
        extend_full_rank_p1(ModMatrix([[1, 0, 1], [1, 0, 1]], 2), 2)


def test_p2_examples():
    assert extend_to_invertible_p2(ModMatrix([[1, 0, 1]], 2)).tolist() == [[1, 0, 0], [0, 1, 0]]
    A = ModMatrix([[1, 0, 0, 0, 0], [0, 0, 1, 0, 0]], 2)
    assert extend_to_invertible_p2(A).tolist() == [[0, 1, 0, 0, 0], [0, 0, 0, 1, 0], [0, 0, 0, 0, 1]]
    with pytest.raises(InvalidInput):
        extend_to_invertible_p2(ModMatrix([[0, 0, 0]], 2))


@given(gf2_mats.filter(lambda M: brute_rank_gf2(M) == M.shape[0]), st.data())
def test_p1_properties(M, data):
    target = data.draw(st.integers(M.shape[0], M.shape[1]))
    E = extend_full_rank_p1(ModMatrix(M, 2), target).entries
    assert E.shape == (target, M.shape[1])
    assert np.array_equal(E[: M.shape[0]], M)
    assert brute_rank_gf2(E) == target
    for row in E[M.shape[0]:]:
        assert row.sum() == 1


def test_p2_invertible_for_every_full_rank_1x3():
    for bits in itertools.product([0, 1], repeat=3):
        if not any(bits):
            continue
        A = ModMatrix([list(bits)], 2)
        full = np.vstack([A.entries, extend_to_invertible_p2(A).entries])
        assert brute_rank_gf2(full) == 3


def test_block_split():
    A = ModMatrix(np.arange(9).reshape(1, 9) % 2, 2)
    blocks = block_split(A, 3)
    assert len(blocks) == 3 and all(b.shape == (1, 3) for b in blocks)
    assert block_split(A, 9)[0] == A
    with pytest.raises(InvalidInput):
        block_split(A, 2)


# --- instance files


def test_instance_round_trip(tmp_path):
    inst = Instance(ModMatrix([[1, 2, 3]], 4), ModVector([2], 4))
    path = tmp_path / "i.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert back.A == inst.A and back.y == inst.y
    assert path.read_text() == inst.dumps()
    assert instance_digest(inst.A, inst.y) == instance_digest(back.A, back.y)
    assert instance_digest(inst.A) != instance_digest(inst.A, inst.y)


@pytest.mark.parametrize("bad, msg", [
    ({"q": 4, "n": 1, "m": 2, "A": [[1, 4]]}, "A[0][1] = 4"),
    ({"q": 4, "n": 1, "m": 3, "A": [[1, 2]]}, "shape"),
    ({"q": 4, "n": 1, "A": [[1, 2]]}, "malformed"),
    ({"q": 4, "n": 1, "m": 2, "A": [[1, 2]], "y": [5]}, "y entries"),
])
def test_malformed_instances(tmp_path, bad, msg):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(InvalidInput, match=msg.replace("[", r"\[").replace("]", r"\]")):
        load_instance(path)
