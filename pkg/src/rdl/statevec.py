"""Dense state vectors over mixed-radix register layouts.

Index order: registers in declaration order; inside a register the digits are
most-significant-first (digit 0 = vector coordinate 0).  A register may carry
one extra "bottom" index (the abort symbol) placed after all digit values;
QFTs, shifts and controlled maps leave it untouched.

Amplitudes are stored as a tensor with one axis per register.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .amplitude import qft_axes
from .config import check_state
from .errors import InvalidInput, ZeroProbability
from .modq import digits_table


@dataclass(frozen=True)
class Register:
    name: str
    radices: tuple[int, ...]
    bottom: bool = False

    @classmethod
    def zq(cls, name: str, q: int, length: int, bottom: bool = False) -> "Register":
        return cls(name, (int(q),) * int(length), bottom)

    @property
    def core_dim(self) -> int:
        return math.prod(self.radices)

    @property
    def dim(self) -> int:
        return self.core_dim + int(self.bottom)

    @property
    def bottom_index(self) -> int:
        if not self.bottom:
            raise InvalidInput(f"register {self.name!r} has no bottom slot")
        return self.core_dim

    def uniform_radix(self) -> int:
        if len(set(self.radices)) != 1:
            raise InvalidInput(f"register {self.name!r} mixes radices {self.radices}")
        return self.radices[0]

    def digits(self) -> np.ndarray:
        """Digit table (core_dim x len) for a uniform-radix register."""
        return digits_table(len(self.radices), self.uniform_radix())

    def index_of(self, digits) -> int:
        v = 0
        for d, r in zip(digits, self.radices):
            v = v * r + int(d)
        return v


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[Register, ...]

    def __post_init__(self):
        names = [r.name for r in self.registers]
        if len(set(names)) != len(names):
            raise InvalidInput(f"duplicate register names in {names}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def dim(self) -> int:
        return math.prod(self.shape)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.registers)

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidInput(f"register {name!r} not found in {self.names}") from None

    def __getitem__(self, name: str) -> Register:
        return self.registers[self.axis(name)]

    def without(self, name: str) -> "RegisterLayout":
        return RegisterLayout(tuple(r for r in self.registers if r.name != name))

    def with_register(self, reg: Register, position: int | None = None) -> "RegisterLayout":
        regs = list(self.registers)
        regs.insert(len(regs) if position is None else position, reg)
        return RegisterLayout(tuple(regs))

    def header(self) -> str:
        parts = []
        for r in self.registers:
            parts.append(",".join(str(x) for x in r.radices) + ("+1" if r.bottom else ""))
        return ";".join(parts)


class StateVector:
    """Amplitude tensor plus layout.  Operations return new objects."""

    __slots__ = ("layout", "amplitudes")

    def __init__(self, layout: RegisterLayout, amplitudes):
        check_state(layout.dim)
        amps = np.asarray(amplitudes, dtype=np.complex128)
        if amps.size != layout.dim:
            raise InvalidInput(f"{amps.size} amplitudes for a layout of dimension {layout.dim}")
        self.layout = layout
        self.amplitudes = amps.reshape(layout.shape)

    @classmethod
    def basis(cls, layout: RegisterLayout, values: dict[str, int] | None = None) -> "StateVector":
        check_state(layout.dim)
        amps = np.zeros(layout.shape, dtype=np.complex128)
        values = values or {}
        amps[tuple(values.get(n, 0) for n in layout.names)] = 1.0
        return cls(layout, amps)

    @classmethod
    def single(cls, reg: Register, vector) -> "StateVector":
        return cls(RegisterLayout((reg,)), vector)

    @property
    def flat(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat))

    def copy(self) -> "StateVector":
        return StateVector(self.layout, self.amplitudes.copy())

    def __repr__(self):
        return f"StateVector({self.layout.names}, dim={self.layout.dim})"


# --------------------------------------------------------------------------
# helpers


def _front(state: StateVector, *names: str) -> tuple[np.ndarray, list[int]]:
    """Move the named axes to the front; return array and the permutation."""
    axes = [state.layout.axis(n) for n in names]
    rest = [a for a in range(len(state.layout.registers)) if a not in axes]
    perm = axes + rest
    return np.transpose(state.amplitudes, perm), perm


def _back(arr: np.ndarray, perm: list[int]) -> np.ndarray:
    return np.transpose(arr, np.argsort(perm))


def append_register(state: StateVector, reg: Register, value: int = 0,
                    position: int | None = None) -> StateVector:
    """Tensor in a new register prepared in basis state ``value``."""
    layout = state.layout.with_register(reg, position)
    check_state(layout.dim)
    e = np.zeros(reg.dim, dtype=np.complex128)
    e[value] = 1.0
    amps = np.multiply.outer(state.amplitudes, e)
    pos = len(state.layout.registers) if position is None else position
    amps = np.moveaxis(amps, -1, pos)
    return StateVector(layout, amps)


def product_state(*states: StateVector) -> StateVector:
    regs: tuple[Register, ...] = ()
    amps = np.ones((), dtype=np.complex128)
    for s in states:
        regs += s.layout.registers
        amps = np.multiply.outer(amps, s.amplitudes)
    return StateVector(RegisterLayout(regs), amps)


# --------------------------------------------------------------------------
# unitaries


def qft_register(state: StateVector, reg_id: str, direction: str = "forward") -> StateVector:
    """Per-digit q-point DFT (kernel omega^{+xy}/sqrt(q) forward); bottom fixed."""
    if direction not in ("forward", "inverse"):
        raise InvalidInput(f"direction must be forward or inverse, got {direction!r}")
    reg = state.layout[reg_id]
    q = reg.uniform_radix()
    k = len(reg.radices)
    arr, perm = _front(state, reg_id)
    out = arr.copy()
    core = arr[: reg.core_dim]
    rest = core.shape[1:]
    t = core.reshape((q,) * k + rest)
    t = qft_axes(t, axes=tuple(range(k)), inverse=(direction == "inverse"))
    out[: reg.core_dim] = t.reshape((reg.core_dim,) + rest)
    return StateVector(state.layout, _back(out, perm))


def _shift_index(reg: Register, shifts: np.ndarray) -> np.ndarray:
    """new_index[c, t] = index of (digits(t) + shifts[c]) mod q."""
    q = reg.uniform_radix()
    k = len(reg.radices)
    shifts = np.atleast_2d(np.asarray(shifts, dtype=np.int64))
    dig = reg.digits()
    out = np.zeros((shifts.shape[0], reg.core_dim), dtype=np.int64)
    for j in range(k):
        out *= q
        out += (dig[:, j][None, :] + shifts[:, j][:, None]) % q
    return out


def shift_register(state: StateVector, reg_id: str, z) -> StateVector:
    """Basis map |x> -> |x + z mod q> on one register; bottom fixed."""
    reg = state.layout[reg_id]
    z = np.asarray(getattr(z, "entries", z), dtype=np.int64).reshape(-1)
    if z.size != len(reg.radices):
        raise InvalidInput(f"shift of length {z.size} for a register with {len(reg.radices)} digits")
    arr, perm = _front(state, reg_id)
    out = arr.copy()
    new = _shift_index(reg, z)[0]
    out[new] = arr[: reg.core_dim]
    return StateVector(state.layout, _back(out, perm))


def controlled_add(state: StateVector, ctrl: str, target: str, matrix, sign: int = 1) -> StateVector:
    """|c>|t> -> |c>|t + sign * M c mod q> for a uniform-radix control.

    ``matrix`` has shape (target digits, control digits).  A bottom value on
    either register is left alone.
    """
    creg, treg = state.layout[ctrl], state.layout[target]
    q = treg.uniform_radix()
    M = np.asarray(matrix, dtype=np.int64)
    if M.shape != (len(treg.radices), len(creg.radices)):
        raise InvalidInput(f"matrix shape {M.shape} does not match registers")
    shifts = (sign * (creg.digits() @ M.T)) % q
    new = _shift_index(treg, shifts)
    arr, perm = _front(state, ctrl, target)
    out = arr.copy()
    C = creg.core_dim
    out[np.arange(C)[:, None], new] = arr[:C, : treg.core_dim]
    return StateVector(state.layout, _back(out, perm))


def _householder_stack(vectors: np.ndarray):
    """Per-branch u and phase phi so that conj(phi) (I - 2uu^+/|u|^2) v = e_0."""
    v = np.asarray(vectors, dtype=np.complex128)
    v0 = v[:, 0]
    mag = np.abs(v0)
    phi = np.where(mag > 0, v0 / np.where(mag > 0, mag, 1.0), 1.0)
    u = v.copy()
    u[:, 0] -= phi
    unorm2 = np.sum(np.abs(u) ** 2, axis=1)
    return u, unorm2, phi


def controlled_map_to_reference(state: StateVector, ctrl_reg: str, target_reg: str,
                                vectors, active=None, inverse: bool = False) -> StateVector:
    """On each control branch c, a reflection-based unitary mapping v_c -> |0...0>.

    ``vectors`` has one row per control value (length = target core dim).
    Rows with ``active[c] == False`` get the identity.  The branch unitary is
    U_c = conj(phi_c) (I - 2 u u^+ / |u|^2) with u = v_c - phi_c e_0 and
    phi_c = v_c[0] / |v_c[0]|, so <0|U_c v_c> = 1.  ``inverse=True`` applies
    the adjoints.
    """
    creg, treg = state.layout[ctrl_reg], state.layout[target_reg]
    V = np.asarray(vectors, dtype=np.complex128)
    if V.shape != (creg.dim, treg.core_dim):
        if V.shape == (creg.core_dim, treg.core_dim):
            V = np.vstack([V, np.zeros((creg.dim - creg.core_dim, treg.core_dim))])
        else:
            raise InvalidInput(f"vectors of shape {V.shape} do not match registers")
    act = np.zeros(V.shape[0], dtype=bool)
    if active is None:
        act[: creg.core_dim] = True
    else:
        given = np.asarray(active, dtype=bool)[: creg.core_dim]
        act[: given.size] = given
    norms = np.linalg.norm(V[act], axis=1)
    if norms.size and np.max(np.abs(norms - 1.0)) > 1e-9:
        raise InvalidInput("controlled reference map needs unit vectors")
    u, unorm2, phi = _householder_stack(V)
    reflect = act & (unorm2 > 1e-30)

    arr, perm = _front(state, ctrl_reg, target_reg)
    out = arr.copy()
    idx = np.flatnonzero(act)
    X = arr[idx, : treg.core_dim]  # (k, D, rest...)
    flatX = X.reshape(X.shape[0], X.shape[1], -1)
    coef = np.einsum("kd,kdr->kr", np.conj(u[idx]), flatX)
    scale = np.where(reflect[idx], 2.0 / np.where(unorm2[idx] > 0, unorm2[idx], 1.0), 0.0)
    Y = flatX - (scale[:, None] * coef)[:, None, :] * u[idx][:, :, None]
    ph = phi[idx] if inverse else np.conj(phi[idx])
    Y = Y * ph[:, None, None]
    out[idx, : treg.core_dim] = Y.reshape(X.shape)
    return StateVector(state.layout, _back(out, perm))


# --------------------------------------------------------------------------
# measurement


def register_distribution(state: StateVector, reg_id: str) -> np.ndarray:
    arr, _ = _front(state, reg_id)
    p = np.abs(arr.reshape(arr.shape[0], -1)) ** 2
    return p.sum(axis=1)


def condition(state: StateVector, reg_id: str, outcome: int, drop: bool = False):
    """Probability of ``outcome`` and the renormalized post-measurement state.

    With ``drop=True`` the measured register is removed from the layout.
    """
    arr, perm = _front(state, reg_id)
    branch = arr[outcome]
    prob = float(np.sum(np.abs(branch) ** 2))
    if prob <= 0.0:
        raise ZeroProbability(f"outcome {outcome} on {reg_id!r} has probability 0")
    branch = branch / math.sqrt(prob)
    if drop:
        layout = state.layout.without(reg_id)
        rest_perm = [p - (p > perm[0]) for p in perm[1:]]
        return prob, StateVector(layout, np.transpose(branch, np.argsort(rest_perm)))
    out = np.zeros_like(arr)
    out[outcome] = branch
    return prob, StateVector(state.layout, _back(out, perm))


def measure_register(state: StateVector, reg_id: str, mode: str = "exact",
                     rng: np.random.Generator | None = None):
    """Exact mode: the outcome distribution.  Sample mode: (outcome, collapsed)."""
    probs = register_distribution(state, reg_id)
    if mode == "exact":
        return probs
    if mode != "sample":
        raise InvalidInput(f"unknown measurement mode {mode!r}")
    if rng is None:
        raise InvalidInput("sample mode needs a seeded generator")
    p = probs / probs.sum()
    outcome = int(rng.choice(p.size, p=p))
    _, post = condition(state, reg_id, outcome)
    return outcome, post


def inner(u: StateVector, v: StateVector) -> complex:
    """<u|v> = sum conj(u_i) v_i."""
    if u.layout != v.layout:
        raise InvalidInput("inner product of states with different layouts")
    return complex(np.vdot(u.flat, v.flat))


# --------------------------------------------------------------------------
# dump format: one ASCII header line of radices, then little-endian
# float64 (re, im) pairs in index order.


def dump(state: StateVector, path) -> None:
    data = np.empty(2 * state.layout.dim, dtype="<f8")
    data[0::2] = state.flat.real
    data[1::2] = state.flat.imag
    with open(path, "wb") as fh:
        fh.write((state.layout.header() + "\n").encode("ascii"))
        fh.write(data.tobytes())


def load_dump(path, names=None) -> StateVector:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        raw = np.frombuffer(fh.read(), dtype="<f8")
    regs = []
    for k, part in enumerate(header.split(";")):
        bottom = part.endswith("+1")
        rad = tuple(int(x) for x in part.removesuffix("+1").split(",") if x)
        name = names[k] if names else f"r{k}"
        regs.append(Register(name, rad, bottom))
    return StateVector(RegisterLayout(tuple(regs)), raw[0::2] + 1j * raw[1::2])
