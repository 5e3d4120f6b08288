"""Labeled forks of one seeded stream.

``rng_for(seed, "audit", 3)`` always yields the same generator regardless of
what other sub-tasks drew, so sweeps can be reordered or parallelized.
"""
from __future__ import annotations

import zlib

import numpy as np


def _label_key(label) -> int:
    return zlib.crc32(str(label).encode("utf-8"))


def rng_for(seed: int, *labels) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_label_key(x) for x in labels))
    return np.random.default_rng(ss)
