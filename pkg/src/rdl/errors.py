"""Exception types.  Each carries a short machine-readable ``code``."""
from __future__ import annotations


class RdlError(Exception):
    code = "error"


class InvalidInput(RdlError, ValueError):
    code = "invalid_input"


class CapExceeded(RdlError):
    code = "cap_exceeded"


class EmptyFiber(RdlError):
    """w_y = 0, so the normalized W_y state does not exist."""

    code = "empty_fiber"


class ZeroProbability(RdlError):
    code = "zero_probability"


class NotReachable(RdlError):
    """A solution that the solver can never output (some branch aborts)."""

    code = "not_reachable"


class PrecheckFailed(RdlError):
    code = "precheck_failed"
