"""Exact desk-scale laboratory for ISIS / S|LWE> reductions.

Submodules:
    modq            modular and GF(2) linear algebra
    amplitude       amplitude families over Z_q^m and their Fourier duals
    statevec        dense mixed-radix state vectors
    lattice_states  |psi_s>, |W_y>, weights and the PGM bound
    isis_solver     recursive randomness-recoverable ISIS solver for q = 2^l
    reductions      forward / reverse / solver-to-oracle pipelines
    cli             experiment driver
    kernels         numba / numpy hot loops (GF(2) elimination, syndrome tables)
    config          size caps;  seeding  labeled random streams;  errors  error types
"""
from __future__ import annotations

__version__ = "0.1.0"
