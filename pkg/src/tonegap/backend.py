"""Kernel backend selection: numba-compiled loops or a pure-numpy fallback.

The active backend is chosen once at import from the TONEGAP_BACKEND
environment variable ("numba" or "numpy"); `set_backend` overrides it at
runtime for tests and benchmarks.  When numba is unavailable the numpy
path is selected automatically.  Both backends are deterministic run to
run; they are not bitwise identical to each other because their summation
orders differ (agreement is at the 1e-12 relative level).
"""

from __future__ import annotations

import os

ENV_VAR = "TONEGAP_BACKEND"
_VALID = ("numba", "numpy")

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False


def _initial_backend() -> str:
    choice = os.environ.get(ENV_VAR, "").strip().lower()
    if choice in _VALID:
        if choice == "numba" and not HAS_NUMBA:
            raise RuntimeError(f"{ENV_VAR}=numba but numba is not importable")
        return choice
    return "numba" if HAS_NUMBA else "numpy"


_ACTIVE = _initial_backend()


def get_backend() -> str:
    return _ACTIVE


def set_backend(name: str) -> str:
    """Select the kernel backend; returns the previous one."""
    global _ACTIVE
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    prev = _ACTIVE
    _ACTIVE = name
    return prev
