"""Amplitude families f : Z_q^m -> C with unit 2-norm, and their duals.

The Fourier transform uses omega = exp(2 pi i / q) with the *positive*
exponent in the forward direction:

    fhat(x) = q^{-m/2} sum_y omega^{x.y} f(y)

which is ``numpy.fft.ifftn(..., norm="ortho")``.  The inverse is ``fftn``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .config import check_dense
from .errors import InvalidInput
from .modq import canonical_lift

NORM_TOL = 1e-9


def qft_axes(a: np.ndarray, axes, inverse: bool = False) -> np.ndarray:
    """Unitary DFT along the given axes (forward = omega^{+xy})."""
    if inverse:
        return np.fft.fftn(a, axes=axes, norm="ortho")
    return np.fft.ifftn(a, axes=axes, norm="ortho")


@dataclass(frozen=True, eq=False)
class AmplitudeTable:
    """Amplitudes over Z_q^m, either dense (flat, mixed-radix) or a product of
    per-coordinate tables of length q."""

    q: int
    m: int
    dense: np.ndarray | None = None
    factors: tuple[np.ndarray, ...] | None = None
    _dual: "AmplitudeTable | None" = field(default=None, repr=False)

    def __post_init__(self):
        if (self.dense is None) == (self.factors is None):
            raise InvalidInput("give exactly one of dense / factors")
        if self.dense is not None:
            d = np.array(self.dense, dtype=np.complex128).reshape(-1)
            if d.size != self.q**self.m:
                raise InvalidInput(f"dense table has {d.size} entries, expected {self.q}^{self.m}")
            d.setflags(write=False)
            object.__setattr__(self, "dense", d)
            norm = float(np.linalg.norm(d))
        else:
            fs = tuple(np.array(f, dtype=np.complex128).reshape(-1) for f in self.factors)
            if len(fs) != self.m or any(f.size != self.q for f in fs):
                raise InvalidInput("product form needs m factors of length q")
            for f in fs:
                f.setflags(write=False)
            object.__setattr__(self, "factors", fs)
            norm = math.prod(float(np.linalg.norm(f)) for f in fs)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidInput(f"amplitudes must have unit 2-norm, got {norm:.12g}")

    @property
    def size(self) -> int:
        return self.q**self.m

    @property
    def is_product(self) -> bool:
        return self.factors is not None

    def to_dense(self) -> np.ndarray:
        """Flat complex array of length q^m (read-only view for dense tables)."""
        if self.dense is not None:
            return self.dense
        check_dense(self.size, "amplitude table")
        out = np.ones(1, dtype=np.complex128)
        for f in self.factors:
            out = np.multiply.outer(out, f).reshape(-1)
        return out

    def tensor(self) -> np.ndarray:
        return self.to_dense().reshape((self.q,) * self.m)

    def values(self, digits: np.ndarray) -> np.ndarray:
        """Amplitudes at the rows of ``digits`` (shape (k, m), residues)."""
        digits = np.asarray(digits, dtype=np.int64).reshape(-1, self.m)
        if self.dense is not None:
            place = self.q ** np.arange(self.m - 1, -1, -1, dtype=np.int64)
            return self.dense[digits @ place]
        out = np.ones(digits.shape[0], dtype=np.complex128)
        for j, f in enumerate(self.factors):
            out *= f[digits[:, j]]
        return out

    def norm(self) -> float:
        if self.dense is not None:
            return float(np.linalg.norm(self.dense))
        return math.prod(float(np.linalg.norm(f)) for f in self.factors)

    @cached_property
    def dual(self) -> "AmplitudeTable":
        return self._dual if self._dual is not None else _transform(self, inverse=False)


def _transform(f: AmplitudeTable, inverse: bool) -> AmplitudeTable:
    if f.is_product:
        fs = [qft_axes(g, axes=(0,), inverse=inverse) for g in f.factors]
        return AmplitudeTable(f.q, f.m, factors=tuple(fs))
    t = qft_axes(f.tensor(), axes=tuple(range(f.m)), inverse=inverse)
    return AmplitudeTable(f.q, f.m, dense=t.reshape(-1))


def fourier(f: AmplitudeTable) -> AmplitudeTable:
    """Forward transform fhat(x) = q^{-m/2} sum_y omega^{x.y} f(y)."""
    return f.dual


def inverse_fourier(fhat: AmplitudeTable) -> AmplitudeTable:
    return _transform(fhat, inverse=True)


def _with_dual(f: AmplitudeTable, fhat: AmplitudeTable) -> AmplitudeTable:
    return AmplitudeTable(f.q, f.m, dense=f.dense, factors=f.factors, _dual=fhat)


# --------------------------------------------------------------------------
# target sets


@dataclass(frozen=True)
class TargetSet:
    """T as a subset of Z_q^m: ``binary`` (residues 0/1), ``linf`` (canonical
    lift with infinity norm <= bound) or ``explicit``."""

    kind: str
    bound: int | None = None
    elements: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("binary", "linf", "explicit"):
            raise InvalidInput(f"unknown target kind {self.kind!r}")
        if self.kind == "linf" and (self.bound is None or self.bound < 0):
            raise InvalidInput("linf target needs a bound >= 0")
        if self.kind == "explicit":
            els = tuple(tuple(int(v) for v in e) for e in (self.elements or ()))
            if len(set(els)) != len(els):
                raise InvalidInput("explicit target set contains duplicates")
            object.__setattr__(self, "elements", els)

    @classmethod
    def binary(cls) -> "TargetSet":
        return cls("binary")

    @classmethod
    def linf(cls, bound: int) -> "TargetSet":
        return cls("linf", bound=int(bound))

    @classmethod
    def explicit(cls, elements) -> "TargetSet":
        return cls("explicit", elements=tuple(tuple(e) for e in elements))

    def coordinate_mask(self, q: int) -> np.ndarray | None:
        """Per-coordinate membership for product-shaped sets, else None."""
        r = np.arange(q)
        if self.kind == "binary":
            return r <= 1
        if self.kind == "linf":
            return np.abs(canonical_lift(r, q)) <= self.bound
        return None

    def contains(self, x, q: int) -> bool:
        x = np.mod(np.asarray(x, dtype=np.int64), q)
        cm = self.coordinate_mask(q)
        if cm is not None:
            return bool(cm[x].all())
        return tuple(x.tolist()) in {tuple(np.mod(e, q)) for e in self.elements}

    def mask(self, q: int, m: int) -> np.ndarray:
        """Dense boolean membership over Z_q^m in mixed-radix order."""
        check_dense(q**m, "target mask")
        cm = self.coordinate_mask(q)
        if cm is not None:
            out = np.ones(1, dtype=bool)
            for _ in range(m):
                out = np.logical_and.outer(out, cm).reshape(-1)
            return out
        out = np.zeros(q**m, dtype=bool)
        place = q ** np.arange(m - 1, -1, -1, dtype=np.int64)
        for e in self.elements:
            if len(e) != m:
                raise InvalidInput(f"target element {e} has length {len(e)}, expected {m}")
            out[int(np.mod(np.asarray(e), q) @ place)] = True
        return out

    def size(self, q: int, m: int) -> int:
        cm = self.coordinate_mask(q)
        if cm is not None:
            return int(cm.sum()) ** m
        return int(self.mask(q, m).sum())

    def to_dict(self) -> dict:
        if self.kind == "linf":
            return {"kind": "linf", "bound": self.bound}
        if self.kind == "explicit":
            return {"kind": "explicit", "elements": [list(e) for e in self.elements]}
        return {"kind": "binary"}


def parse_target(d: dict) -> TargetSet:
    kind = d.get("kind")
    if kind == "binary":
        return TargetSet.binary()
    if kind == "linf":
        return TargetSet.linf(int(d["bound"]))
    if kind == "explicit":
        return TargetSet.explicit(d.get("elements", []))
    raise InvalidInput(f"unknown target kind {kind!r}")


# --------------------------------------------------------------------------
# families


def delta_family(q: int, m: int) -> AmplitudeTable:
    e = np.zeros(q, dtype=np.complex128)
    e[0] = 1.0
    return AmplitudeTable(q, m, factors=(e,) * m)


def uniform_family(q: int, m: int) -> AmplitudeTable:
    u = np.full(q, q**-0.5, dtype=np.complex128)
    return AmplitudeTable(q, m, factors=(u,) * m)


def dense_family(values, q: int, m: int) -> AmplitudeTable:
    """Dense family from arbitrary complex values, normalized to unit norm."""
    v = np.asarray(values, dtype=np.complex128).reshape(-1)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise InvalidInput("amplitude vector is identically zero")
    return AmplitudeTable(q, m, dense=v / nrm)


def random_family(q: int, m: int, rng: np.random.Generator) -> AmplitudeTable:
    """Dense family with i.i.d. complex Gaussian entries, normalized."""
    check_dense(q**m)
    v = rng.standard_normal(q**m) + 1j * rng.standard_normal(q**m)
    return dense_family(v, q, m)


def indicator_fourier_family(T: TargetSet, q: int, m: int) -> AmplitudeTable:
    """The f whose dual is exactly 1_T / sqrt(|T|)."""
    cm = T.coordinate_mask(q)
    if cm is not None:
        k = int(cm.sum())
        if k == 0:
            raise InvalidInput("target set is empty")
        col = cm.astype(np.complex128) / math.sqrt(k)
        fhat = AmplitudeTable(q, m, factors=(col,) * m)
    else:
        mask = T.mask(q, m)
        k = int(mask.sum())
        if k == 0:
            raise InvalidInput("target set is empty")
        fhat = AmplitudeTable(q, m, dense=mask.astype(np.complex128) / math.sqrt(k))
    return _with_dual(inverse_fourier(fhat), fhat)


def gaussian_coordinate(sigma: float, q: int, tol: float = 1e-15) -> np.ndarray:
    """Per-coordinate amplitudes ~ sqrt(sum_k exp(-pi (x + k q)^2 / sigma^2))."""
    if not sigma > 0:
        raise InvalidInput("sigma must be positive")
    x = canonical_lift(np.arange(q), q).astype(float)
    # terms with |k| > K are below tol for every x in the lift range
    K = int(math.ceil(sigma * math.sqrt(math.log(1.0 / tol) / math.pi) / q)) + 1
    k = np.arange(-K, K + 1, dtype=float)
    terms = np.exp(-math.pi * (x[:, None] + k[None, :] * q) ** 2 / sigma**2)
    terms[terms < tol] = 0.0
    prob = terms.sum(axis=1)
    amp = np.sqrt(prob / prob.sum())
    return amp.astype(np.complex128)


def gaussian_family(sigma: float, q: int, m: int) -> AmplitudeTable:
    g = gaussian_coordinate(sigma, q)
    return AmplitudeTable(q, m, factors=(g,) * m)


def mass_on(fhat: AmplitudeTable, T: TargetSet) -> float:
    """1 - eta = sum over x in T of |fhat(x)|^2."""
    cm = T.coordinate_mask(fhat.q)
    if fhat.is_product and cm is not None:
        return float(math.prod(float(np.sum(np.abs(f[cm]) ** 2)) for f in fhat.factors))
    mask = T.mask(fhat.q, fhat.m)
    return float(np.sum(np.abs(fhat.to_dense()[mask]) ** 2))


def parse_family(d: dict, q: int, m: int) -> AmplitudeTable:
    kind = d.get("kind")
    if kind == "delta":
        return delta_family(q, m)
    if kind == "uniform":
        return uniform_family(q, m)
    if kind == "indicator_fourier":
        return indicator_fourier_family(parse_target(d["T"]), q, m)
    if kind == "gaussian":
        return gaussian_family(float(d["sigma"]), q, m)
    if kind == "dense":
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape or re.size != q**m:
            raise InvalidInput(f"dense family needs {q**m} real and imaginary parts")
        return dense_family(re + 1j * im, q, m)
    raise InvalidInput(f"unknown amplitude family {kind!r}")
