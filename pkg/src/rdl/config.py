"""Size caps.

The dense amplitude-table cap defaults to 2**22 points and can be overridden
with the ``RDL_CAP`` environment variable or :func:`set_dense_cap`.  State
vectors get a separate cap (default 2**24 amplitudes, ``RDL_STATE_CAP``).
"""
from __future__ import annotations

import os

from .errors import CapExceeded

DEFAULT_DENSE_CAP = 1 << 22
DEFAULT_STATE_CAP = 1 << 24

_overrides: dict[str, int] = {}


def _from_env(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if not raw:
        return default
    return int(raw, 0)


def dense_cap() -> int:
    if "dense" in _overrides:
        return _overrides["dense"]
    return _from_env("RDL_CAP", DEFAULT_DENSE_CAP)


def state_cap() -> int:
    if "state" in _overrides:
        return _overrides["state"]
    return max(_from_env("RDL_STATE_CAP", DEFAULT_STATE_CAP), dense_cap())


def set_dense_cap(value: int | None) -> None:
    if value is None:
        _overrides.pop("dense", None)
    else:
        _overrides["dense"] = int(value)


def set_state_cap(value: int | None) -> None:
    if value is None:
        _overrides.pop("state", None)
    else:
        _overrides["state"] = int(value)


def check_dense(size: int, what: str = "table") -> None:
    cap = dense_cap()
    if size > cap:
        raise CapExceeded(f"{what} needs {size} points, dense cap is {cap}")


def check_state(size: int, what: str = "state") -> None:
    cap = state_cap()
    if size > cap:
        raise CapExceeded(f"{what} needs {size} amplitudes, state cap is {cap}")
