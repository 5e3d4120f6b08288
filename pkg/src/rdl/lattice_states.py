"""State families attached to an instance (A, f):

    |psi_s> = sum_e f(e) |A^T s + e>
    |W_y>   = w_y^{-1/2} sum_s omega^{-y.s} |psi_s>
            = inverse QFT of (q^n / sqrt(w_y)) sum_{x : A x = y} fhat(x) |x>
    w_y     = q^{2n} sum_{x : A x = y} |fhat(x)|^2

plus the pretty-good-measurement success probability
p_max = (E_y sqrt(w_y / q^n))^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .amplitude import AmplitudeTable, qft_axes
from .config import check_dense
from .errors import CapExceeded, EmptyFiber, InvalidInput
from .modq import ModMatrix, ModVector, digits_table, is_prime, solve_affine_mod_prime
from .statevec import (
    Register,
    RegisterLayout,
    StateVector,
    append_register,
    controlled_add,
    qft_register,
)

# weights below ZERO_WEIGHT * q^n are treated as empty fibers
ZERO_WEIGHT = 1e-20


def _check_pair(A: ModMatrix, f: AmplitudeTable) -> None:
    if f.q != A.modulus or f.m != A.cols:
        raise InvalidInput(f"family over Z_{f.q}^{f.m} does not match A ({A.shape} mod {A.modulus})")


@lru_cache(maxsize=32)
def syndrome_indices(A: ModMatrix) -> np.ndarray:
    """Index of A x in Z_q^n for every x in Z_q^m (mixed-radix order)."""
    check_dense(A.modulus**A.cols, "syndrome table")
    out = kernels.syndrome_table(A.entries, A.modulus)
    out.setflags(write=False)
    return out


def phase_matrix(q: int, n: int) -> np.ndarray:
    """P[y, s] = omega^{y.s} over Z_q^n."""
    d = digits_table(n, q)
    return np.exp(2j * np.pi * ((d @ d.T) % q) / q)


def transposed_shifts(A: ModMatrix) -> np.ndarray:
    """Row s holds A^T s for every s in Z_q^n."""
    return (digits_table(A.rows, A.modulus) @ A.entries) % A.modulus


def sample_register(A: ModMatrix, name: str = "sample") -> Register:
    return Register.zq(name, A.modulus, A.cols)


def syndrome_register(A: ModMatrix, name: str = "syndrome") -> Register:
    return Register.zq(name, A.modulus, A.rows)


# --------------------------------------------------------------------------
# fibers and weights


@dataclass(frozen=True, eq=False)
class DualFiber:
    y: ModVector
    points: np.ndarray  # (k, m) residues, sorted by mixed-radix index
    weight: float

    @property
    def elements(self) -> list[ModVector]:
        return [ModVector(p, self.y.modulus) for p in self.points]

    def __len__(self):
        return self.points.shape[0]


def weights(A: ModMatrix, f: AmplitudeTable) -> np.ndarray:
    """w_y for every y (indexed mixed-radix), from the Fourier side."""
    _check_pair(A, f)
    q, n = A.modulus, A.rows
    mass = np.abs(f.dual.to_dense()) ** 2
    w = np.bincount(syndrome_indices(A), weights=mass, minlength=q**n)
    return q ** (2 * n) * w


def enumerate_fiber(A: ModMatrix, y: ModVector, f_hat: AmplitudeTable) -> DualFiber:
    """{x in Z_q^m : A x = y} with the weight q^{2n} sum |fhat(x)|^2.

    For prime q the fiber is a particular solution plus the span of a kernel
    basis; otherwise all of Z_q^m is scanned.
    """
    q, n, m = A.modulus, A.rows, A.cols
    if len(y) != n or y.modulus != q:
        raise InvalidInput("y does not match A")
    if f_hat.q != q or f_hat.m != m:
        raise InvalidInput("fhat does not match A")
    if is_prime(q):
        sol = solve_affine_mod_prime(A.entries, y.entries, q)
        if sol is None:
            pts = np.zeros((0, m), dtype=np.int64)
        else:
            x0, ker = sol
            k = ker.shape[0]
            if q**k > _fiber_cap():
                raise CapExceeded(f"fiber has {q}^{k} points")
            coeffs = digits_table(k, q)
            pts = (x0[None, :] + coeffs @ ker) % q
            place = q ** np.arange(m - 1, -1, -1, dtype=np.int64)
            pts = pts[np.argsort(pts @ place, kind="stable")]
    else:
        syn = syndrome_indices(A)
        idx = np.flatnonzero(syn == y.index())
        pts = digits_table(m, q)[idx] if idx.size else np.zeros((0, m), dtype=np.int64)
    vals = f_hat.values(pts) if len(pts) else np.zeros(0)
    w = q ** (2 * n) * float(np.sum(np.abs(vals) ** 2))
    return DualFiber(y, pts, w)


def _fiber_cap() -> int:
    from .config import dense_cap

    return dense_cap()


# --------------------------------------------------------------------------
# states


def psi_amplitudes(A: ModMatrix, f: AmplitudeTable, s_index: int) -> np.ndarray:
    """Flat amplitudes of |psi_s>: value f(v - A^T s) at position v."""
    shift = transposed_shifts(A)[s_index]
    t = f.tensor()
    return np.roll(t, shift=tuple(int(z) for z in shift), axis=tuple(range(A.cols))).reshape(-1)


def build_psi(A: ModMatrix, f: AmplitudeTable, s: ModVector, name: str = "sample") -> StateVector:
    _check_pair(A, f)
    if len(s) != A.rows or s.modulus != A.modulus:
        raise InvalidInput("s does not match A")
    return StateVector.single(sample_register(A, name), psi_amplitudes(A, f, s.index()))


def w_fourier_amplitudes(A: ModMatrix, f: AmplitudeTable, y_index: int) -> tuple[np.ndarray, float]:
    """(What_y as a flat array, w_y); raises EmptyFiber when w_y = 0."""
    q, n = A.modulus, A.rows
    fh = f.dual.to_dense()
    mask = syndrome_indices(A) == y_index
    w = q ** (2 * n) * float(np.sum(np.abs(fh[mask]) ** 2))
    if w <= ZERO_WEIGHT * q**n:
        raise EmptyFiber(f"w_y = {w:.3g} for y index {y_index}")
    vec = np.where(mask, fh, 0.0) * (q**n / math.sqrt(w))
    return vec, w


def w_amplitudes(A: ModMatrix, f: AmplitudeTable, y_index: int) -> tuple[np.ndarray, float]:
    vec, w = w_fourier_amplitudes(A, f, y_index)
    t = qft_axes(vec.reshape((A.modulus,) * A.cols), axes=tuple(range(A.cols)), inverse=True)
    return t.reshape(-1), w


def build_w(A: ModMatrix, f: AmplitudeTable, y: ModVector, name: str = "sample"):
    """(|W_y>, w_y), built in the Fourier domain then inverse-transformed."""
    _check_pair(A, f)
    if len(y) != A.rows or y.modulus != A.modulus:
        raise InvalidInput("y does not match A")
    vec, w = w_amplitudes(A, f, y.index())
    return StateVector.single(sample_register(A, name), vec), w


def all_w(A: ModMatrix, f: AmplitudeTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack of all W_y (rows, zero rows for empty fibers), weights, and mask."""
    q, n = A.modulus, A.rows
    w = weights(A, f)
    active = w > ZERO_WEIGHT * q**n
    fh = f.dual.to_dense()
    syn = syndrome_indices(A)
    W = np.zeros((q**n, q**A.cols), dtype=np.complex128)
    for yi in np.flatnonzero(active):
        vec = np.where(syn == yi, fh, 0.0) * (q**n / math.sqrt(w[yi]))
        W[yi] = qft_axes(vec.reshape((q,) * A.cols), axes=tuple(range(A.cols)), inverse=True).reshape(-1)
    return W, w, active


# --------------------------------------------------------------------------
# syndrome appending: QFT, |x>|a> -> |x>|a + A x>, inverse QFT


def apply_syndrome_map(A: ModMatrix, state: StateVector, sample: str, target: str,
                       inverse: bool = False) -> StateVector:
    """Unitary |v>|a> -> QFT^-1 (|x>|a + A x>) after QFT on ``sample``."""
    st = qft_register(state, sample, "forward")
    st = controlled_add(st, sample, target, A.entries, sign=-1 if inverse else 1)
    return qft_register(st, sample, "inverse")


def append_syndrome(A: ModMatrix, state: StateVector, reg: str = "sample",
                    name: str = "syndrome") -> StateVector:
    """Append a Z_q^n register holding the syndrome: |W_y> -> |W_y>|y>."""
    r = state.layout[reg]
    if r.radices != (A.modulus,) * A.cols:
        raise InvalidInput(f"register {reg!r} is not a Z_{A.modulus}^{A.cols} register")
    st = append_register(state, syndrome_register(A, name))
    return apply_syndrome_map(A, st, reg, name)


# --------------------------------------------------------------------------
# PGM


def pmax_formula(A: ModMatrix, f: AmplitudeTable) -> float:
    """p_max = (E_y sqrt(w_y / q^n))^2."""
    q, n = A.modulus, A.rows
    w = weights(A, f)
    return float(np.mean(np.sqrt(np.maximum(w, 0.0) / q**n)) ** 2)


def psi_stack(A: ModMatrix, f: AmplitudeTable) -> np.ndarray:
    """All |psi_s> as rows (q^n x q^m), built in position space."""
    _check_pair(A, f)
    return np.stack([psi_amplitudes(A, f, s) for s in range(A.modulus**A.rows)])


def pgm_success_direct(A: ModMatrix, f: AmplitudeTable) -> float:
    """E_s |<Y_s|psi_s>|^2 with Y_s = q^{-n/2} sum_y omega^{y.s} |W_y>.

    Everything is assembled from the position-space |psi_s>; the W_y and their
    normalizers come from the direct sums over s.
    """
    q, n = A.modulus, A.rows
    psi = psi_stack(A, f)
    P = phase_matrix(q, n)
    raw = np.conj(P) @ psi  # row y: sum_s omega^{-y.s} psi_s
    w = np.sum(np.abs(raw) ** 2, axis=1)
    keep = w > ZERO_WEIGHT * q**n
    W = np.zeros_like(raw)
    W[keep] = raw[keep] / np.sqrt(w[keep])[:, None]
    Y = (P.T @ W) / math.sqrt(q**n)  # row s: sum_y omega^{y.s} W_y
    overlaps = np.einsum("sd,sd->s", np.conj(Y), psi)
    return float(np.mean(np.abs(overlaps) ** 2))


def fourier_identity_errors(A: ModMatrix, f: AmplitudeTable) -> dict[str, float]:
    """Worst-case residuals of the Fourier-side identities for (A, f).

    * ``psi_fourier``: QFT|psi_s> against sum_y omega^{y.s} sum_{x in fiber} fhat(x)|x>
      (fibers from :func:`enumerate_fiber`);
    * ``w_fourier``: QFT of the direct sum w_y^{-1/2} sum_s omega^{-y.s}|psi_s>
      against (q^n / sqrt(w_y)) sum_{x in fiber} fhat(x)|x>;
    * ``psi_to_w``: |psi_s> against q^{-n} sum_y omega^{y.s} sqrt(w_y) |W_y>;
    * ``w_to_psi``: :func:`build_w` against the direct sum;
    * ``mean_weight``: |E_y w_y - q^n|;
    * ``weight_routes``: direct-sum norms against the Fourier-side weights.
    """
    q, n, m = A.modulus, A.rows, A.cols
    N = q**n
    fh = f.dual
    P = phase_matrix(q, n)
    psi = psi_stack(A, f)
    axes = tuple(range(m))
    place = q ** np.arange(m - 1, -1, -1, dtype=np.int64)

    # fiber-side pieces: What_y unnormalized = sum_{x in fiber} fhat(x)|x>
    fibers = [enumerate_fiber(A, ModVector.from_index(yi, n, q), fh) for yi in range(N)]
    Fy = np.zeros((N, q**m), dtype=np.complex128)
    for yi, fib in enumerate(fibers):
        if len(fib):
            idx = fib.points @ place
            Fy[yi, idx] = fh.values(fib.points)
    w_fib = np.array([fib.weight for fib in fibers])

    errs = {}
    qpsi = qft_axes(psi.reshape((N,) + (q,) * m), axes=tuple(a + 1 for a in axes)).reshape(N, -1)
    rhs = P.T @ Fy  # row s: sum_y omega^{y.s} Fy[y]
    errs["psi_fourier"] = float(np.max(np.linalg.norm(qpsi - rhs, axis=1)))

    raw = np.conj(P) @ psi
    w_direct = np.sum(np.abs(raw) ** 2, axis=1)
    keep = w_fib > ZERO_WEIGHT * N
    worst_w, worst_back = 0.0, 0.0
    W = np.zeros_like(raw)
    for yi in np.flatnonzero(keep):
        direct = raw[yi] / math.sqrt(w_direct[yi])
        qd = qft_axes(direct.reshape((q,) * m), axes=axes).reshape(-1)
        worst_w = max(worst_w, float(np.linalg.norm(qd - Fy[yi] * (N / math.sqrt(w_fib[yi])))))
        W[yi], _ = w_amplitudes(A, f, yi)
        worst_back = max(worst_back, float(np.linalg.norm(W[yi] - direct)))
    errs["w_fourier"] = worst_w
    errs["w_to_psi"] = worst_back
    recon = (P.T @ (np.sqrt(w_fib)[:, None] * W)) / N
    errs["psi_to_w"] = float(np.max(np.linalg.norm(recon - psi, axis=1)))
    errs["mean_weight"] = float(abs(np.mean(w_fib) - N))
    errs["weight_routes"] = float(np.max(np.abs(w_direct - w_fib)))
    return errs
