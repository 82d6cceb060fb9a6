"""Curvature coefficients bounding E[phi(X)] - phi(E[X]) by multiples of Var(X).

For a twice-differentiable phi, the gap between the mean of phi and phi of
the mean is sandwiched by J_minus(mu) * Var(X) and J_plus(mu) * Var(X),
where the J's are the infimum and supremum over x of

    h(x, mu) = (phi(x) - phi(mu)) / (x - mu)^2 - phi'(mu) / (x - mu).

This module ships the catalog of nonlinearities that arise when the
supported losses are composed with the supported tone maps, closed-form J
expressions where they exist, a grid + golden-section numeric inf/sup
search that works for any phi, and the interval assembly that converts the
gap bounds into lower/upper bounds on expected-loss minimizers.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, DomainError, NumericError
from .losses import LossSpec
from .search import golden_section_maximize, golden_section_minimize
from .tonemap import GAMMA_EXPONENT as _E
from .tonemap import ToneMap, make_tonemap

ANALYTIC = "analytic"
NUMERIC = "numeric"

# Near the removable singularity at x == mu the direct formula for h loses
# all precision to cancellation; inside this relative radius a second-order
# Taylor fill is used instead.
_GUARD_REL = 3e-3


@dataclass(frozen=True)
class PhiFunction:
    """A scalar nonlinearity with its derivative and its value at zero.

    value/derivative are numpy-vectorized; value_at_zero is the (finite)
    limit of value at the origin, used when probing the x -> 0 end of the
    inf/sup search.
    """

    name: str
    value: Callable
    derivative: Callable
    epsilon: Optional[float] = None
    value_at_zero: float = 0.0


@dataclass(frozen=True)
class JensenBoundPair:
    """Coefficient functions J_minus(y) <= J_plus(y) with per-side provenance."""

    phi_name: str
    epsilon: Optional[float]
    j_minus: Callable
    j_plus: Callable
    method_minus: str
    method_plus: str


@dataclass(frozen=True)
class NumericJ:
    """Numeric inf/sup of h(., y) with the abscissas where they were found."""

    j_minus: float
    j_plus: float
    x_minus: float
    x_plus: float


@dataclass(frozen=True)
class BiasInterval:
    """Bounds on the expected-loss minimizer implied by the gap bounds."""

    lower: float
    upper: float
    method: str = ANALYTIC  # "analytic" or "mixed" when a numeric J was used

    def __post_init__(self):
        if not (self.lower <= self.upper):
            raise NumericError(
                f"bias interval inverted: [{self.lower}, {self.upper}]"
            )

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= x <= self.upper + tol


# ---------------------------------------------------------------------------
# Catalog of nonlinearities
# ---------------------------------------------------------------------------

_MAP_NAMES = ("reinhard", "gamma", "reinhard_gamma")


def phi_from_tonemap(tm: ToneMap) -> PhiFunction:
    return PhiFunction(
        name=tm.name,
        value=tm.value,
        derivative=tm.derivative,
        value_at_zero=float(tm.value(0.0)),
    )


def phi_sq_from_tonemap(tm: ToneMap) -> PhiFunction:
    def value(x):
        t = tm.value(x)
        return t * t

    def derivative(x):
        return 2.0 * tm.value(x) * tm.derivative(x)

    t0 = float(tm.value(0.0))
    return PhiFunction(f"{tm.name}_sq", value, derivative, value_at_zero=t0 * t0)


def phi_inv_sq_from_tonemap(tm: ToneMap, epsilon: float) -> PhiFunction:
    def value(x):
        return 1.0 / (tm.value(x) + epsilon) ** 2

    def derivative(x):
        return -2.0 * tm.derivative(x) / (tm.value(x) + epsilon) ** 3

    t0 = float(tm.value(0.0))
    name = "inv_sq" if tm.name == "identity" else f"inv_sq_{tm.name}"
    return PhiFunction(name, value, derivative, epsilon, 1.0 / (t0 + epsilon) ** 2)


def phi_ratio_from_tonemap(tm: ToneMap, epsilon: float) -> PhiFunction:
    def value(x):
        t = tm.value(x)
        return t / (t + epsilon) ** 2

    def derivative(x):
        t = tm.value(x)
        return tm.derivative(x) * (epsilon - t) / (t + epsilon) ** 3

    t0 = float(tm.value(0.0))
    name = "ratio" if tm.name == "identity" else f"ratio_{tm.name}"
    return PhiFunction(name, value, derivative, epsilon, t0 / (t0 + epsilon) ** 2)


def _phi_square() -> PhiFunction:
    return PhiFunction("square", lambda x: np.asarray(x, float) ** 2,
                       lambda x: 2.0 * np.asarray(x, float))


def _phi_identity() -> PhiFunction:
    return PhiFunction("identity", lambda x: np.asarray(x, float) + 0.0,
                       lambda x: np.ones_like(np.asarray(x, float)))


# The 14 catalog rows: the three tone maps, the two target-normalizing
# weights (raw and composed with each map), and the squared maps.
TABLE_ROWS = (
    "reinhard",
    "gamma",
    "reinhard_gamma",
    "inv_sq",
    "ratio",
    "inv_sq_reinhard",
    "ratio_reinhard",
    "inv_sq_gamma",
    "ratio_gamma",
    "inv_sq_reinhard_gamma",
    "ratio_reinhard_gamma",
    "reinhard_sq",
    "gamma_sq",
    "reinhard_gamma_sq",
)

# Rows whose upper coefficient has no known closed form; it is evaluated
# numerically (and cached) instead.
STAR_ROWS = frozenset({"ratio_gamma", "ratio_reinhard_gamma"})

_EPS_ROWS = frozenset(r for r in TABLE_ROWS if r.startswith(("inv_sq", "ratio")))

PHI_NAMES = TABLE_ROWS + ("identity", "square")


def make_phi(name: str, epsilon: Optional[float] = None) -> PhiFunction:
    """Build a catalog nonlinearity by name.

    Rows containing the epsilon regularizer require `epsilon`; the pure
    tone-map rows ignore it.
    """
    if name not in PHI_NAMES:
        raise ContractError(f"unknown phi {name!r}; valid rows: {', '.join(PHI_NAMES)}")
    if name in _EPS_ROWS:
        if epsilon is None or not (epsilon > 0.0):
            raise ContractError(f"phi {name!r} requires a positive epsilon")
    if name == "identity":
        return _phi_identity()
    if name == "square":
        return _phi_square()
    if name in _MAP_NAMES:
        return phi_from_tonemap(make_tonemap(name))
    if name == "inv_sq":
        return phi_inv_sq_from_tonemap(make_tonemap("identity"), epsilon)
    if name == "ratio":
        return phi_ratio_from_tonemap(make_tonemap("identity"), epsilon)
    if name.startswith("inv_sq_"):
        return phi_inv_sq_from_tonemap(make_tonemap(name[len("inv_sq_"):]), epsilon)
    if name.startswith("ratio_"):
        return phi_ratio_from_tonemap(make_tonemap(name[len("ratio_"):]), epsilon)
    return phi_sq_from_tonemap(make_tonemap(name[: -len("_sq")]))


# ---------------------------------------------------------------------------
# The h function
# ---------------------------------------------------------------------------

def _taylor_fill_coeffs(phi: PhiFunction, mu: float) -> tuple[float, float]:
    """(phi''(mu)/2, phi'''(mu)/6) by central differences of the derivative."""
    h2 = mu * 6e-6
    c2 = (float(phi.derivative(mu + h2)) - float(phi.derivative(mu - h2))) / (2.0 * h2)
    h3 = mu * 1.2e-4
    c3 = (
        float(phi.derivative(mu + h3))
        - 2.0 * float(phi.derivative(mu))
        + float(phi.derivative(mu - h3))
    ) / (h3 * h3)
    return 0.5 * c2, c3 / 6.0


def h(phi: PhiFunction, x: float, mu: float) -> float:
    """The divided-difference curvature kernel of phi at (x, mu).

    Defined for x > 0, mu > 0.  At x == mu the removable singularity is
    filled with phi''(mu)/2; within a small relative neighbourhood of mu a
    second-order Taylor value replaces the catastrophically cancelling
    direct formula.
    """
    if not (x > 0.0) or not (mu > 0.0):
        raise DomainError(f"h requires x > 0 and mu > 0, got x={x}, mu={mu}")
    d = x - mu
    if abs(d) <= _GUARD_REL * mu:
        c2, c3 = _taylor_fill_coeffs(phi, mu)
        return c2 + c3 * d
    return (float(phi.value(x)) - float(phi.value(mu))) / (d * d) - float(
        phi.derivative(mu)
    ) / d


def _h_values(phi: PhiFunction, xs: np.ndarray, mu: float) -> np.ndarray:
    """Vectorized h over a positive grid, with the near-mu Taylor fill."""
    d = xs - mu
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = (phi.value(xs) - float(phi.value(mu))) / (d * d) - float(
            phi.derivative(mu)
        ) / d
    near = np.abs(d) <= _GUARD_REL * mu
    if np.any(near):
        c2, c3 = _taylor_fill_coeffs(phi, mu)
        out = np.where(near, c2 + c3 * d, out)
    return out


def _h_at_zero(phi: PhiFunction, mu: float) -> float:
    """The x -> 0+ limit of h(., mu), evaluated from the exact value at zero.

    phi is continuous at the origin for every catalog row even when its
    derivative diverges there, so the limit reduces to plugging x = 0 into
    the direct formula.  Grid-endpoint extrapolation is avoided on this end:
    several rows approach the limit with a fractional power whose slope is
    unbounded, which defeats polynomial extrapolation.
    """
    return (phi.value_at_zero - float(phi.value(mu))) / (mu * mu) + float(
        phi.derivative(mu)
    ) / mu


# ---------------------------------------------------------------------------
# Numeric inf/sup search
# ---------------------------------------------------------------------------

def numeric_j(
    phi: PhiFunction,
    y: float,
    grid_points: int = 4096,
    x_lo: float = 1e-8,
    x_hi: float = 1e8,
    refine_tol: float = 1e-8,
) -> NumericJ:
    """Numeric inf and sup of h(., y) over x in (0, inf).

    A log-spaced coarse grid is scanned, the limits at both ends are added
    as explicit candidates (x -> 0 from the exact value at the origin,
    x -> inf by endpoint extrapolation in 1/x with a consistency check),
    and the best interior cells are refined by golden section.
    """
    if not (y > 0.0):
        raise DomainError(f"numeric_j requires y > 0, got {y}")
    xs = np.geomspace(x_lo, x_hi, grid_points)
    hs = _h_values(phi, xs, y)
    bad = ~np.isfinite(hs)
    if np.any(bad):
        raise NumericError(
            f"non-finite h for phi {phi.name!r} at x={xs[bad][:5].tolist()}"
        )

    h0 = _h_at_zero(phi, y)
    # Tail limit: h behaves like c/x plus faster-decaying terms for every
    # sub-quadratic phi, so linear extrapolation in 1/x from the two largest
    # nodes is exact to leading order; a second extrapolation one node back
    # guards against an extremum escaping past the grid.
    ratio = xs[-1] / xs[-2]
    h_inf = hs[-1] + (hs[-1] - hs[-2]) / (ratio - 1.0)
    h_inf_check = hs[-2] + (hs[-2] - hs[-3]) / (xs[-2] / xs[-3] - 1.0)
    scale = max(1.0, float(np.max(np.abs(hs))))
    if abs(h_inf - h_inf_check) > 1e-5 * scale:
        raise NumericError(
            f"inconsistent tail limit for phi {phi.name!r} at y={y}: "
            f"{h_inf} vs {h_inf_check}"
        )

    def h_scalar(x):
        return h(phi, x, y)

    k_min = int(np.argmin(hs))
    lo = xs[max(k_min - 1, 0)]
    hi = xs[min(k_min + 1, grid_points - 1)]
    x_ref_min, h_ref_min = golden_section_minimize(h_scalar, lo, hi, refine_tol)

    k_max = int(np.argmax(hs))
    lo = xs[max(k_max - 1, 0)]
    hi = xs[min(k_max + 1, grid_points - 1)]
    x_ref_max, h_ref_max = golden_section_maximize(h_scalar, lo, hi, refine_tol)

    min_candidates = [(h_ref_min, x_ref_min), (h0, 0.0), (h_inf, np.inf)]
    max_candidates = [(h_ref_max, x_ref_max), (h0, 0.0), (h_inf, np.inf)]
    j_minus, x_minus = min(min_candidates, key=lambda c: c[0])
    j_plus, x_plus = max(max_candidates, key=lambda c: c[0])
    return NumericJ(float(j_minus), float(j_plus), float(x_minus), float(x_plus))


# ---------------------------------------------------------------------------
# Closed-form J expressions
# ---------------------------------------------------------------------------
# Exponents with denominator 11 are expressed through the gamma exponent
# (5/11) so every formula shares the exact constant used by the tone maps.

def _pow(y, p):
    with np.errstate(divide="ignore", over="ignore"):
        return np.asarray(y, float) ** p


def _jm_reinhard(y, eps):
    return -1.0 / (1.0 + y) ** 2


def _jm_gamma(y, eps):
    return -(1.0 - _E) * _pow(y, _E - 2.0)


def _jm_reinhard_gamma(y, eps):
    return -(y + (1.0 - _E)) * _pow(y, _E - 2.0) * _pow(1.0 + y, -1.0 - _E)


def _jp_inv_sq(y, eps):
    return (3.0 * eps + y) / (eps**2 * (eps + y) ** 3)


def _jm_ratio(y, eps):
    return -2.0 / (eps + y) ** 3


def _jp_ratio(y, eps):
    # The closed form is the value of h at its interior critical point, which
    # is the supremum only while y >= eps; below that the critical point
    # disappears, h stays negative, and the supremum is the tail limit 0.
    val = (y - eps) ** 2 / (4.0 * eps * (eps + y) ** 4)
    return np.where(np.asarray(y, float) >= eps, val, 0.0)


def _jp_inv_sq_reinhard(y, eps):
    num = 2.0 * eps**2 * y + 2.0 * eps**2 + 3.0 * eps * y + 3.0 * eps + y
    return num / (eps**2 * (eps * y + eps + y) ** 3)


def _jm_ratio_reinhard(y, eps):
    return -(eps * y + eps + y + 2.0) / (eps * y + eps + y) ** 3


def _jp_ratio_reinhard(y, eps):
    # Same critical-point validity threshold as the uncomposed row, here in
    # tone-mapped space: the supremum is 0 until y/(1+y) reaches eps.
    num = (eps + 1.0) ** 2 * (eps * y + eps - y) ** 2
    val = num / (4.0 * eps * (eps * y + eps + y) ** 4)
    return np.where(eps * y + eps - y <= 0.0, val, 0.0)


def _jp_inv_sq_gamma(y, eps):
    num = 12.0 * eps**2 * y + 33.0 * eps * _pow(y, 1.0 + _E) + 11.0 * _pow(y, 1.0 + 2.0 * _E)
    den = 11.0 * eps**2 * _pow(y, 3.0 - _E) * (eps + _pow(y, _E)) ** 3
    return num / den


def _jm_ratio_gamma(y, eps):
    num = 2.0 * (3.0 * eps * y + 8.0 * _pow(y, 1.0 + _E))
    den = 11.0 * _pow(y, 3.0 - _E) * (eps + _pow(y, _E)) ** 3
    return -num / den


def _jp_inv_sq_reinhard_gamma(y, eps):
    opy = 1.0 + y
    num = (
        22.0 * eps**2 * y**2
        + 12.0 * eps**2 * y
        + 33.0 * eps * _pow(y, 1.0 + _E) * _pow(opy, 1.0 - _E)
        + 11.0 * _pow(y, 1.0 + 2.0 * _E) * _pow(opy, _E / 5.0)
    )
    den = (
        11.0
        * eps**2
        * _pow(y, 3.0 - _E)
        * _pow(opy, _E / 5.0)
        * (eps * _pow(opy, _E) + _pow(y, _E)) ** 3
    )
    return num / den


def _jm_ratio_reinhard_gamma(y, eps):
    opy = 1.0 + y
    num = (
        11.0 * eps * y**2 * _pow(opy, _E)
        + 6.0 * eps * y * _pow(opy, _E)
        + 11.0 * _pow(y, 2.0 + _E)
        + 16.0 * _pow(y, 1.0 + _E)
    )
    den = 11.0 * _pow(y, 3.0 - _E) * _pow(opy, 1.0 - _E) * (eps * _pow(opy, _E) + _pow(y, _E)) ** 3
    return -num / den


def _jm_reinhard_sq(y, eps):
    return -(y * y) / (1.0 + y) ** 4


def _jp_reinhard_sq(y, eps):
    return np.where(y <= 1.0, (1.0 - y) / (1.0 + y) ** 3, 0.0)


def _jm_gamma_sq(y, eps):
    return -(_E / 5.0) * _pow(y, -(1.0 + _E / 5.0))


def _jm_reinhard_gamma_sq(y, eps):
    return -(y + _E / 5.0) * _pow(y, -(1.0 + _E / 5.0)) * _pow(1.0 + y, -(1.0 + 2.0 * _E))


def _zero(y, eps):
    return np.zeros_like(np.asarray(y, float)) + 0.0


def _one(y, eps):
    return np.zeros_like(np.asarray(y, float)) + 1.0


# (j_minus, j_plus) expressions per row; None marks a side with no closed
# form (computed numerically instead).
_ANALYTIC_J = {
    "reinhard": (_jm_reinhard, _zero),
    "gamma": (_jm_gamma, _zero),
    "reinhard_gamma": (_jm_reinhard_gamma, _zero),
    "inv_sq": (_zero, _jp_inv_sq),
    "ratio": (_jm_ratio, _jp_ratio),
    "inv_sq_reinhard": (_zero, _jp_inv_sq_reinhard),
    "ratio_reinhard": (_jm_ratio_reinhard, _jp_ratio_reinhard),
    "inv_sq_gamma": (_zero, _jp_inv_sq_gamma),
    "ratio_gamma": (_jm_ratio_gamma, None),
    "inv_sq_reinhard_gamma": (_zero, _jp_inv_sq_reinhard_gamma),
    "ratio_reinhard_gamma": (_jm_ratio_reinhard_gamma, None),
    "reinhard_sq": (_jm_reinhard_sq, _jp_reinhard_sq),
    "gamma_sq": (_jm_gamma_sq, _zero),
    "reinhard_gamma_sq": (_jm_reinhard_gamma_sq, _zero),
    "identity": (_zero, _zero),
    "square": (_one, _one),
}

# Cache for the numerically evaluated upper coefficients of the star rows:
# exact re-evaluation keyed by (row, epsilon, y), safe for concurrent
# readers with locked insertion.
_STAR_CACHE: dict = {}
_STAR_CACHE_LOCK = threading.Lock()


def _star_j_plus(name: str, epsilon: float, y: float) -> float:
    key = (name, epsilon, y)
    got = _STAR_CACHE.get(key)
    if got is not None:
        return got
    phi = make_phi(name, epsilon)
    val = numeric_j(phi, y, refine_tol=1e-10).j_plus
    with _STAR_CACHE_LOCK:
        _STAR_CACHE[key] = val
    return val


def analytic_j(phi_name: str, epsilon: Optional[float] = None) -> JensenBoundPair:
    """Closed-form coefficient pair for a catalog row.

    Rows with a blank side evaluate to the constant zero on that side.  For
    the two rows whose upper coefficient has no closed form, j_plus falls
    back to the cached numeric search and is tagged accordingly.
    """
    if phi_name not in _ANALYTIC_J:
        raise ContractError(
            f"unknown row {phi_name!r}; valid rows: {', '.join(PHI_NAMES)}"
        )
    if phi_name in _EPS_ROWS and (epsilon is None or not (epsilon > 0.0)):
        raise ContractError(f"row {phi_name!r} requires a positive epsilon")
    jm_expr, jp_expr = _ANALYTIC_J[phi_name]
    eps = epsilon

    def j_minus(y):
        return float(jm_expr(y, eps))

    if jp_expr is None:
        def j_plus(y):
            if not (y > 0.0):
                raise DomainError(f"numeric j_plus of {phi_name!r} requires y > 0")
            return _star_j_plus(phi_name, eps, float(y))

        method_plus = NUMERIC
    else:
        def j_plus(y):
            return float(jp_expr(y, eps))

        method_plus = ANALYTIC
    return JensenBoundPair(phi_name, eps, j_minus, j_plus, ANALYTIC, method_plus)


# ---------------------------------------------------------------------------
# Minimizer bias intervals
# ---------------------------------------------------------------------------

def _j_pair_for(tm: ToneMap, role: str, epsilon: float):
    """J bounds callables for one building block of a loss minimizer.

    role: "t" (the map itself), "t_sq", "ratio", or "inv_sq".  Maps outside
    the catalog fall back to the numeric search on the composed phi.
    """
    known = tm.name == "identity" or tm.name in _MAP_NAMES
    if known:
        if role == "t":
            row = "identity" if tm.name == "identity" else tm.name
        elif role == "t_sq":
            row = "square" if tm.name == "identity" else f"{tm.name}_sq"
        elif role == "ratio":
            row = "ratio" if tm.name == "identity" else f"ratio_{tm.name}"
        else:
            row = "inv_sq" if tm.name == "identity" else f"inv_sq_{tm.name}"
        pair = analytic_j(row, epsilon if row in _EPS_ROWS else None)
        numeric_used = pair.method_plus == NUMERIC or pair.method_minus == NUMERIC
        return pair.j_minus, pair.j_plus, numeric_used
    if role == "t":
        phi = phi_from_tonemap(tm)
    elif role == "t_sq":
        phi = phi_sq_from_tonemap(tm)
    elif role == "ratio":
        phi = phi_ratio_from_tonemap(tm, epsilon)
    else:
        phi = phi_inv_sq_from_tonemap(tm, epsilon)

    def j_minus(y):
        return numeric_j(phi, y).j_minus

    def j_plus(y):
        return numeric_j(phi, y).j_plus

    return j_minus, j_plus, True


def _clamp0(x: float) -> float:
    # Expectations of nonnegative functions cannot go below zero; a lower
    # bound that does is tightened to zero.
    return x if x > 0.0 else 0.0


def _invert_to_linear(tm: ToneMap, q: float) -> float:
    """Map a bound in tone-mapped space back to linear scale.

    Values outside the map's image saturate to the corresponding edge of
    the linear domain (0 or +inf) instead of failing, because interval
    endpoints may legitimately overshoot the image.
    """
    t0 = float(tm.value(0.0))
    if tm.increasing:
        if q <= t0:
            return 0.0
        if tm.output_bound is not None and q >= tm.output_bound:
            return np.inf
        if not np.isfinite(q):
            return np.inf
        return float(tm.inverse(q))
    # Decreasing: the image is (lim_inf, T(0)], largest argument first.
    if q >= t0:
        return 0.0
    if not np.isfinite(q) or q <= 0.0:
        return np.inf
    x = float(tm.inverse(q))
    return np.inf if not np.isfinite(x) or x < 0.0 else x


def bias_interval(spec: LossSpec, y: float, variance: float) -> BiasInterval:
    """Bounds on the minimizer of the expected loss for a clean target y.

    The expectation brackets implied by the gap bounds are combined by
    interval arithmetic in tone-mapped space and then pulled back through
    the inverse map; taking min/max of the pulled-back endpoints makes the
    result correct for decreasing maps as well, where the inequalities
    change direction.
    """
    if not (y > 0.0):
        raise DomainError(f"bias_interval requires y > 0, got {y}")
    if not (variance >= 0.0):
        raise DomainError(f"variance must be >= 0, got {variance}")

    eps = spec.epsilon
    if spec.kind == "hdr_star":
        # Frozen-denominator training recovers the mean exactly.
        return BiasInterval(y, y)

    tm = spec.tonemap if spec.placement != "none" else make_tonemap("identity")
    ty = float(tm.value(y))
    numeric_used = False

    if spec.kind == "l2":
        jm, jp, used = _j_pair_for(tm, "t", eps)
        numeric_used |= used
        q_lo = _clamp0(ty + jm(y) * variance)
        q_hi = ty + jp(y) * variance
    elif spec.kind == "hdr":
        jm_t, jp_t, used_t = _j_pair_for(tm, "t", eps)
        jm_t2, jp_t2, used_t2 = _j_pair_for(tm, "t_sq", eps)
        numeric_used |= used_t or used_t2
        m1_lo = _clamp0(ty + jm_t(y) * variance)
        m1_hi = ty + jp_t(y) * variance
        m2_lo = _clamp0(ty * ty + jm_t2(y) * variance)
        m2_hi = ty * ty + jp_t2(y) * variance
        q_lo = (m2_lo + eps * m1_lo) / (m1_hi + eps)
        q_hi = (m2_hi + eps * m1_hi) / (m1_lo + eps)
    else:  # rmse
        jm_r, jp_r, used_r = _j_pair_for(tm, "ratio", eps)
        jm_w, jp_w, used_w = _j_pair_for(tm, "inv_sq", eps)
        numeric_used |= used_r or used_w
        phi1 = ty / (ty + eps) ** 2
        phi2 = 1.0 / (ty + eps) ** 2
        n_lo = _clamp0(phi1 + jm_r(y) * variance)
        n_hi = phi1 + jp_r(y) * variance
        d_lo = _clamp0(phi2 + jm_w(y) * variance)
        d_hi = phi2 + jp_w(y) * variance
        q_lo = n_lo / d_hi
        with np.errstate(divide="ignore"):
            q_hi = n_hi / d_lo if d_lo > 0.0 else np.inf

    a = _invert_to_linear(tm, q_lo)
    b = _invert_to_linear(tm, q_hi)
    lower, upper = (a, b) if a <= b else (b, a)
    return BiasInterval(lower, upper, "mixed" if numeric_used else ANALYTIC)


# ---------------------------------------------------------------------------
# Curve emission
# ---------------------------------------------------------------------------

def _coefficient_at_zero(fn: Callable) -> float:
    """Limit of a J expression at y = 0, classified from small-y samples.

    Rows diverge at the origin like a negative power of y or settle to a
    finite value; sampling at two decades apart separates the cases without
    tripping over 0**negative arithmetic.
    """
    j6 = float(fn(1e-6))
    j7 = float(fn(1e-7))
    if not np.isfinite(j7) or abs(j7) > 2.0 * abs(j6):
        return np.copysign(np.inf, j7 if np.isfinite(j7) else j6)
    val = float(fn(0.0))
    return val if np.isfinite(val) else j6


def curve_emit(
    phi_names=TABLE_ROWS,
    y_grid=None,
    epsilon: float = 0.01,
) -> list[tuple[str, float, float, str]]:
    """Rows (phi, y, max(|J_minus|, |J_plus|), method) for curve plotting.

    y = 0 entries are limits of the closed forms; a numeric-only upper
    coefficient cannot be evaluated at 0, but on every such row the lower
    coefficient already diverges there, so the maximum is unaffected.
    """
    if y_grid is None:
        y_grid = np.concatenate([[0.0], np.geomspace(1e-2, 1e2, 199)])
    out = []
    for name in phi_names:
        pair = analytic_j(name, epsilon if name in _EPS_ROWS else None)
        for y in np.asarray(y_grid, dtype=float):
            if y > 0.0:
                jm = pair.j_minus(y)
                jp = pair.j_plus(y)
                method_m, method_p = pair.method_minus, pair.method_plus
            else:
                jm = _coefficient_at_zero(pair.j_minus)
                jp = (
                    _coefficient_at_zero(pair.j_plus)
                    if pair.method_plus == ANALYTIC
                    else 0.0
                )
                method_m = method_p = ANALYTIC
            if abs(jm) >= abs(jp):
                j_abs, method = abs(jm), method_m
            else:
                j_abs, method = abs(jp), method_p
            out.append((name, float(y), float(j_abs), method))
    return out
