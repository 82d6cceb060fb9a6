"""Parametric noisy-target distributions with exactly known mean and variance.

Every family is supported on [0, inf) (or [0, M] for the bounded ones) and
is constructed so that E[sample] equals the requested clean value exactly.
Sampling is deterministic given (model, seed, n): draws come from a
counter-based Philox generator keyed by the seed, so parallel workers can
use disjoint seeds without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import ContractError, DomainError

FAMILIES = ("gamma", "lognormal", "scaled_bernoulli", "two_point", "clipped_lognormal")

_SQRT2 = math.sqrt(2.0)


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / _SQRT2))


@dataclass(frozen=True)
class NoiseModel:
    """A noisy-target distribution with exact first two moments.

    `param` is the family-specific shape parameter recorded for round-trip
    serialization; the derived internals live in `internals`.
    """

    family: str
    mean: float
    variance: float
    support_max: Optional[float]
    param: Optional[float]
    internals: tuple = ()

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "mean": self.mean,
            "param": self.param,
            "support_max": self.support_max,
        }

    @staticmethod
    def from_json_dict(d) -> "NoiseModel":
        return make_noise_model(
            d["family"],
            float(d["mean"]),
            param=None if d.get("param") is None else float(d["param"]),
            support_max=None if d.get("support_max") is None else float(d["support_max"]),
        )


def _clipped_lognormal_mean(mu: float, sigma: float, cap: float) -> float:
    """E[min(X, cap)] for X lognormal(mu, sigma)."""
    d = (math.log(cap) - mu) / sigma
    return math.exp(mu + 0.5 * sigma * sigma) * _norm_cdf(d - sigma) + cap * (
        1.0 - _norm_cdf(d)
    )


def _clipped_lognormal_second_moment(mu: float, sigma: float, cap: float) -> float:
    d = (math.log(cap) - mu) / sigma
    return math.exp(2.0 * mu + 2.0 * sigma * sigma) * _norm_cdf(d - 2.0 * sigma) + (
        cap * cap
    ) * (1.0 - _norm_cdf(d))


def _calibrate_clipped_lognormal(mean: float, sigma: float, cap: float) -> float:
    """Location parameter giving E[min(X, cap)] = mean, by bisection.

    The clipped mean is strictly increasing in the location, from 0 to cap,
    so a sign-changing bracket always exists for 0 < mean < cap.  Bisection
    runs the bracket down to ~1e-15 relative width, well past the 1e-12
    calibration requirement.
    """
    lo = math.log(mean) - 1.0
    while _clipped_lognormal_mean(lo, sigma, cap) > mean:
        lo -= 8.0
    hi = math.log(cap) + sigma * sigma
    while _clipped_lognormal_mean(hi, sigma, cap) < mean:
        hi += 8.0
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if _clipped_lognormal_mean(mid, sigma, cap) < mean:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def make_noise_model(
    family: str,
    mean: float,
    param: Optional[float] = None,
    support_max: Optional[float] = None,
) -> NoiseModel:
    """Construct a noise model with E[sample] = mean exactly.

    Family parameters:
      gamma             param = shape k (> 0); variance = mean^2 / k
      lognormal         param = relative variance; variance = param * mean^2
      scaled_bernoulli  support_max = M; all mass on {0, M}; variance = mean (M - mean)
      two_point         param = half-spread a (default mean, giving {0, 2 mean});
                        variance = a^2
      clipped_lognormal param = log-space sigma; support_max = M; a lognormal
                        clipped at M with the location calibrated so the mean
                        is exact
    """
    if family not in FAMILIES:
        raise ContractError(f"unknown family {family!r}; valid: {FAMILIES}")
    if not (mean > 0.0):
        raise DomainError(f"mean must be > 0, got {mean}")

    if family == "gamma":
        k = 2.0 if param is None else float(param)
        if not (k > 0.0):
            raise DomainError(f"gamma shape must be > 0, got {k}")
        return NoiseModel(family, mean, mean * mean / k, None, k, internals=(k, mean / k))

    if family == "lognormal":
        rel = 1.0 if param is None else float(param)
        if not (rel > 0.0):
            raise DomainError(f"relative variance must be > 0, got {rel}")
        sigma2 = math.log1p(rel)
        mu = math.log(mean) - 0.5 * sigma2
        return NoiseModel(
            family, mean, rel * mean * mean, None, rel, internals=(mu, math.sqrt(sigma2))
        )

    if family == "scaled_bernoulli":
        if support_max is None:
            raise ContractError("scaled_bernoulli requires support_max")
        cap = float(support_max)
        if not (0.0 < mean <= cap):
            raise DomainError(f"need 0 < mean <= support_max, got {mean} > {cap}")
        p = mean / cap
        return NoiseModel(family, mean, mean * (cap - mean), cap, None, internals=(p, cap))

    if family == "two_point":
        a = mean if param is None else float(param)
        if not (0.0 < a <= mean):
            raise DomainError(f"two_point spread must be in (0, mean], got {a}")
        return NoiseModel(
            family, mean, a * a, mean + a, a, internals=(mean - a, mean + a)
        )

    # clipped_lognormal
    sigma = 1.0 if param is None else float(param)
    if support_max is None:
        raise ContractError("clipped_lognormal requires support_max")
    cap = float(support_max)
    if not (sigma > 0.0):
        raise DomainError(f"sigma must be > 0, got {sigma}")
    if not (mean < cap):
        raise DomainError(f"mean must be < support_max, got {mean} >= {cap}")
    mu = _calibrate_clipped_lognormal(mean, sigma, cap)
    m2 = _clipped_lognormal_second_moment(mu, sigma, cap)
    variance = m2 - mean * mean
    return NoiseModel(family, mean, variance, cap, sigma, internals=(mu, sigma, cap))


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def sample(model: NoiseModel, seed: int, n: int) -> np.ndarray:
    """Draw n targets; deterministic for fixed (model, seed, n)."""
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    rng = _rng(seed)
    if model.family == "gamma":
        k, scale = model.internals
        return rng.gamma(k, scale, n)
    if model.family == "lognormal":
        mu, sigma = model.internals
        return rng.lognormal(mu, sigma, n)
    if model.family == "scaled_bernoulli":
        p, cap = model.internals
        return np.where(rng.random(n) < p, cap, 0.0)
    if model.family == "two_point":
        lo, hi = model.internals
        return np.where(rng.random(n) < 0.5, hi, lo)
    mu, sigma, cap = model.internals
    return np.minimum(rng.lognormal(mu, sigma, n), cap)


def bhatia_davis_bound(mean: float, support_max: float) -> float:
    """Variance upper bound (M - y) y for a distribution on [0, M] with mean y.

    Vanishes at both ends and peaks at M^2/4 in the middle; the two-point
    family with all mass on {0, M} attains it exactly.
    """
    if not (0.0 <= mean <= support_max):
        raise DomainError(
            f"mean must lie in [0, support_max]; got mean={mean}, M={support_max}"
        )
    return (support_max - mean) * mean


def expectation(model: NoiseModel, fn: Callable, tol: float = 1e-12) -> float:
    """E[fn(sample)] computed without sampling.

    Discrete families use the exact two-atom sum; continuous families use
    adaptive quadrature.  The lognormal families are integrated in log space
    where the Gaussian weight tames both tails.
    """
    if model.family == "scaled_bernoulli":
        p, cap = model.internals
        return (1.0 - p) * float(fn(0.0)) + p * float(fn(cap))
    if model.family == "two_point":
        lo, hi = model.internals
        return 0.5 * float(fn(lo)) + 0.5 * float(fn(hi))

    if model.family == "gamma":
        k, scale = model.internals
        lognorm_const = math.lgamma(k) + k * math.log(scale)

        def integrand(x):
            if x <= 0.0:
                return 0.0
            logpdf = (k - 1.0) * math.log(x) - x / scale - lognorm_const
            return float(fn(x)) * math.exp(logpdf)

        # Split at a deep-tail point: quad cannot mix breakpoints with an
        # infinite limit, and the bulk piece needs the mean as a hint.
        split = model.mean + 30.0 * model.std + 30.0 * scale
        bulk, _ = integrate.quad(
            integrand, 0.0, split, epsabs=tol, epsrel=tol, limit=400,
            points=[model.mean],
        )
        tail, _ = integrate.quad(
            integrand, split, np.inf, epsabs=tol, epsrel=tol, limit=400
        )
        return bulk + tail

    if model.family == "lognormal":
        mu, sigma = model.internals

        def integrand(z):
            # The Gaussian weight underflows to exactly 0 before exp(mu+sigma z)
            # can overflow, so the deep tails contribute literal zeros.
            if abs(z) > 42.0:
                return 0.0
            return float(fn(math.exp(mu + sigma * z))) * math.exp(-0.5 * z * z)

        val, _ = integrate.quad(
            integrand, -np.inf, np.inf, epsabs=tol, epsrel=tol, limit=400
        )
        return val / math.sqrt(2.0 * math.pi)

    # clipped_lognormal: continuous part below the cap plus the atom at it
    mu, sigma, cap = model.internals
    d = (math.log(cap) - mu) / sigma

    def integrand(z):
        if abs(z) > 42.0:
            return 0.0
        return float(fn(math.exp(mu + sigma * z))) * math.exp(-0.5 * z * z)

    val, _ = integrate.quad(integrand, -np.inf, d, epsabs=tol, epsrel=tol, limit=400)
    return val / math.sqrt(2.0 * math.pi) + float(fn(cap)) * (1.0 - _norm_cdf(d))
