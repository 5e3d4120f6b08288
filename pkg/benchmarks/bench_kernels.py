"""Time the numba and numpy backends of each hot kernel.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call (compilation or cache load) is excluded.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from rdl import kernels


def cases(rng):
    for r, c in [(8, 64), (64, 200), (200, 600)]:
        words = kernels.pack_bits(rng.integers(0, 2, size=(r, c)))
        yield "gf2_rref", f"{r}x{c}", (words, c)
    for q, n, m, radix in [(2, 1, 16, 2), (3, 2, 10, 3), (4, 2, 8, 4), (4, 1, 18, 2)]:
        A = rng.integers(0, q, size=(n, m)).astype(np.int64)
        yield "syndrome_table", f"q={q} n={n} m={m} radix={radix}", (A, q, radix)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'case':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'ratio':>8}")
    for name, label, call_args in cases(rng):
        impl = kernels.IMPLEMENTATIONS[name]
        ref = impl["numpy"](*call_args)
        got = impl["numba"](*call_args)  # warm-up
        same = all(np.array_equal(a, b) for a, b in zip(ref, got)) if isinstance(ref, tuple) \
            else np.array_equal(ref, got)
        assert same, f"backends disagree on {name} {label}"
        t = {}
        for backend in ("numba", "numpy"):
            fn = impl[backend]
            t[backend] = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<16}{label:<28}{t['numba']:>12.3f}{t['numpy']:>12.3f}{t['numpy'] / t['numba']:>8.1f}")


if __name__ == "__main__":
    main()
