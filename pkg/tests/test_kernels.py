from __future__ import annotations

import itertools
import os
import subprocess
import sys

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from rdl import kernels


def naive_syndromes(A: np.ndarray, q: int, radix: int) -> np.ndarray:
    n, m = A.shape
    out = []
    for x in itertools.product(range(radix), repeat=m):
        y = (A @ np.array(x, dtype=np.int64)) % q
        out.append(int(sum(int(v) * q ** (n - 1 - i) for i, v in enumerate(y))))
    return np.array(out, dtype=np.int64)


@given(st.integers(1, 6), st.integers(1, 130), st.data())
def test_pack_unpack_round_trip(r, c, data):
    bits = data.draw(st.lists(st.integers(0, 1), min_size=r * c, max_size=r * c))
    M = np.array(bits, dtype=np.int64).reshape(r, c)
    assert np.array_equal(kernels.unpack_bits(kernels.pack_bits(M), c), M)


@given(st.integers(1, 8), st.integers(1, 140), st.data())
def test_rref_backends_agree(r, c, data):
    bits = data.draw(st.lists(st.integers(0, 1), min_size=r * c, max_size=r * c))
    words = kernels.pack_bits(np.array(bits).reshape(r, c))
    impl = kernels.IMPLEMENTATIONS["gf2_rref"]
    ra, pa = impl["numba"](words.copy(), c)
    rb, pb = impl["numpy"](words.copy(), c)
    assert np.array_equal(pa, pb)
    assert np.array_equal(ra, rb)


def test_rref_is_reduced():
    rng = np.random.default_rng(3)
    M = rng.integers(0, 2, size=(6, 70))
    red, piv = kernels.gf2_rref(kernels.pack_bits(M), 70)
    D = kernels.unpack_bits(red, 70)
    for k, c in enumerate(piv):
        col = D[:, c]
        assert col[k] == 1 and col.sum() == 1
    assert not D[len(piv):].any()


@given(st.integers(2, 5), st.integers(1, 2), st.integers(1, 5), st.booleans(), st.data())
def test_syndrome_table_backends_match_naive(q, n, m, binary, data):
    A = np.array(data.draw(st.lists(st.integers(0, q - 1), min_size=n * m, max_size=n * m))).reshape(n, m)
    radix = 2 if binary else q
    truth = naive_syndromes(A, q, radix)
    impl = kernels.IMPLEMENTATIONS["syndrome_table"]
    assert np.array_equal(impl["numba"](A, q, radix), truth)
    assert np.array_equal(impl["numpy"](A, q, radix), truth)


def test_numpy_chunking_matches():
    A = np.array([[1, 2, 3, 0, 1, 2, 3, 1]])
    full = kernels._syndrome_table_np(A, 4, 4)
    chunked = kernels._syndrome_table_np(A, 4, 4, chunk=1000)
    assert np.array_equal(full, chunked)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, RDL_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from rdl import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
