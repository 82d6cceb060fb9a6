"""Scalar tone-mapping operators with derivatives and closed-form inverses.

Every map is strictly monotonic and nonnegative on [0, inf).  Values,
derivatives, and inverses are plain numpy-vectorized callables so they can
be applied elementwise to sample arrays.  Maps are immutable and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

# Exponent of the gamma compression step, stored once so every formula
# derives from the same double.
GAMMA_EXPONENT = 1.0 / 2.2

TONEMAP_NAMES = ("identity", "reinhard", "gamma", "reinhard_gamma", "input_log")


@dataclass(frozen=True)
class ToneMap:
    """A twice-differentiable, strictly monotonic, nonnegative scalar map."""

    name: str
    value: Callable = field(repr=False)
    derivative: Callable = field(repr=False)
    second_derivative: Callable = field(repr=False)
    inverse: Callable = field(repr=False)
    increasing: bool = True
    output_bound: Optional[float] = None

    def __call__(self, v):
        return self.value(v)


def _as_array(v):
    return np.asarray(v, dtype=np.float64)


# --- identity ---------------------------------------------------------------

def _identity_value(v):
    return _as_array(v) + 0.0


def _identity_derivative(v):
    return np.ones_like(_as_array(v))


def _identity_second(v):
    return np.zeros_like(_as_array(v))


# --- reinhard: v / (1 + v) --------------------------------------------------

def _reinhard_value(v):
    v = _as_array(v)
    return v / (1.0 + v)


def _reinhard_derivative(v):
    v = _as_array(v)
    return 1.0 / (1.0 + v) ** 2


def _reinhard_second(v):
    v = _as_array(v)
    return -2.0 / (1.0 + v) ** 3


def _reinhard_inverse(t):
    t = _as_array(t)
    return t / (1.0 - t)


# --- gamma: v ** (1/2.2) ----------------------------------------------------
# The derivative is singular at v = 0; it evaluates to +inf there, which the
# bound machinery treats as a legitimate diverging limit rather than an error.

def _gamma_value(v):
    v = _as_array(v)
    return v**GAMMA_EXPONENT


def _gamma_derivative(v):
    v = _as_array(v)
    with np.errstate(divide="ignore"):
        return GAMMA_EXPONENT * v ** (GAMMA_EXPONENT - 1.0)


def _gamma_second(v):
    v = _as_array(v)
    with np.errstate(divide="ignore"):
        return GAMMA_EXPONENT * (GAMMA_EXPONENT - 1.0) * v ** (GAMMA_EXPONENT - 2.0)


def _gamma_inverse(t):
    t = _as_array(t)
    return t ** (1.0 / GAMMA_EXPONENT)


# --- reinhard_gamma: (v / (1 + v)) ** (1/2.2) --------------------------------

def _reinhard_gamma_value(v):
    v = _as_array(v)
    return (v / (1.0 + v)) ** GAMMA_EXPONENT


def _reinhard_gamma_derivative(v):
    v = _as_array(v)
    with np.errstate(divide="ignore"):
        return GAMMA_EXPONENT * v ** (GAMMA_EXPONENT - 1.0) * (1.0 + v) ** (-GAMMA_EXPONENT - 1.0)


def _reinhard_gamma_second(v):
    v = _as_array(v)
    e = GAMMA_EXPONENT
    with np.errstate(divide="ignore"):
        return e * v ** (e - 2.0) * (1.0 + v) ** (-e - 2.0) * (e - 1.0 - 2.0 * v)


def _reinhard_gamma_inverse(t):
    t = _as_array(t)
    s = t ** (1.0 / GAMMA_EXPONENT)
    return s / (1.0 - s)


# --- input_log: ln(1 + v) / 10 -----------------------------------------------

def _input_log_value(v):
    v = _as_array(v)
    return np.log1p(v) / 10.0


def _input_log_derivative(v):
    v = _as_array(v)
    return 0.1 / (1.0 + v)


def _input_log_second(v):
    v = _as_array(v)
    return -0.1 / (1.0 + v) ** 2


def _input_log_inverse(t):
    t = _as_array(t)
    return np.expm1(10.0 * t)


_REGISTRY = {
    "identity": ToneMap(
        "identity",
        _identity_value,
        _identity_derivative,
        _identity_second,
        _identity_value,
    ),
    "reinhard": ToneMap(
        "reinhard",
        _reinhard_value,
        _reinhard_derivative,
        _reinhard_second,
        _reinhard_inverse,
        output_bound=1.0,
    ),
    "gamma": ToneMap(
        "gamma",
        _gamma_value,
        _gamma_derivative,
        _gamma_second,
        _gamma_inverse,
    ),
    "reinhard_gamma": ToneMap(
        "reinhard_gamma",
        _reinhard_gamma_value,
        _reinhard_gamma_derivative,
        _reinhard_gamma_second,
        _reinhard_gamma_inverse,
        output_bound=1.0,
    ),
    "input_log": ToneMap(
        "input_log",
        _input_log_value,
        _input_log_derivative,
        _input_log_second,
        _input_log_inverse,
    ),
}


def make_tonemap(name: str) -> ToneMap:
    """Return the named tone map; raises DomainError for unknown names."""
    try:
        return _REGISTRY[name]
    except KeyError:
        raise DomainError(
            f"unknown tone map {name!r}; valid names are {', '.join(TONEMAP_NAMES)}"
        ) from None


def apply_inverse(tonemap: ToneMap, t):
    """Map a tone-mapped value t back to linear radiance.

    t must lie in the image of tonemap.value: nonnegative, and strictly
    below output_bound for bounded maps.
    """
    arr = _as_array(t)
    if np.any(arr < 0.0):
        raise DomainError(f"tone-mapped value must be >= 0, got {t!r}")
    if tonemap.output_bound is not None and np.any(arr >= tonemap.output_bound):
        raise DomainError(
            f"tone-mapped value must be < output bound {tonemap.output_bound} "
            f"for map {tonemap.name!r}, got {t!r}"
        )
    return tonemap.inverse(arr)
