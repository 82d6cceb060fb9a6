"""Scalar search utilities: golden-section refinement on positive intervals."""

from __future__ import annotations

import math
from typing import Callable

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_minimize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    rel_tol: float = 1e-8,
    max_iter: int = 400,
) -> tuple[float, float]:
    """Minimize a unimodal f over [lo, hi] with 0 < lo < hi.

    The search runs in log space, so `rel_tol` is a relative tolerance on
    the abscissa.  Returns (argmin, f(argmin)).  Fully deterministic: the
    iteration sequence depends only on (lo, hi, rel_tol).
    """
    if not (0.0 < lo < hi):
        raise ValueError(f"need 0 < lo < hi, got [{lo}, {hi}]")
    a = math.log(lo)
    b = math.log(hi)
    width = b - a
    c = a + _INVPHI2 * width
    d = a + _INVPHI * width
    fc = f(math.exp(c))
    fd = f(math.exp(d))
    it = 0
    while (b - a) > rel_tol and it < max_iter:
        if fc < fd:
            b, d, fd = d, c, fc
            c = a + _INVPHI2 * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(math.exp(d))
        it += 1
    if fc < fd:
        return math.exp(c), fc
    return math.exp(d), fd


def golden_section_maximize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    rel_tol: float = 1e-8,
    max_iter: int = 400,
) -> tuple[float, float]:
    """Maximize a unimodal f over [lo, hi]; see golden_section_minimize."""
    x, neg = golden_section_minimize(lambda v: -f(v), lo, hi, rel_tol, max_iter)
    return x, -neg


def count_local_minima(values, rel_noise: float = 1e-12) -> int:
    """Count strict local minima of a sampled curve, ignoring float-level noise.

    Plateaus are collapsed before counting, and differences smaller than
    `rel_noise` times the value scale are treated as zero.
    """
    import numpy as np

    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size < 3:
        return 1 if v.size else 0
    scale = max(float(np.max(np.abs(v))), 1e-300)
    d = np.diff(v)
    sign = np.where(d > rel_noise * scale, 1, np.where(d < -rel_noise * scale, -1, 0))
    sign = sign[sign != 0]
    if sign.size == 0:
        return 1
    interior = int(np.sum((sign[:-1] == -1) & (sign[1:] == 1)))
    # Endpoints count as minima when the curve moves away from them upward
    # (left) or toward them downward (right).
    left = 1 if sign[0] == 1 else 0
    right = 1 if sign[-1] == -1 else 0
    return interior + left + right
