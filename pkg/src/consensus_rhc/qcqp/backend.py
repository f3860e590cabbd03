"""Solver kernel selection: compiled extension with pure-Python fallback.

The compiled kernel is preferred when importable.  CONSENSUS_RHC_BACKEND
overrides the choice ("compiled" or "python"); requesting an unavailable
backend is an error rather than a silent downgrade.
"""
from __future__ import annotations

import os

from . import _barrier_py

_KERNELS = {"python": _barrier_py.barrier_solve}
try:
    from . import _barrier as _barrier_c
    _KERNELS["compiled"] = _barrier_c.barrier_solve
except ImportError:
    _barrier_c = None


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_KERNELS))


def default_backend() -> str:
    forced = os.environ.get("CONSENSUS_RHC_BACKEND")
    if forced:
        if forced not in _KERNELS:
            raise RuntimeError(
                f"CONSENSUS_RHC_BACKEND={forced!r} requested but only "
                f"{available_backends()} are available")
        return forced
    return "compiled" if "compiled" in _KERNELS else "python"


def kernel(name: str | None = None):
    return _KERNELS[name or default_backend()]


BACKEND_NAME = default_backend()
