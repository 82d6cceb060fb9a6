"""Brute-force verification of the closed-form minimizers and their bias bounds.

For a (loss spec, noise model) pair the engine draws one common random
sample set, scans the sampled mean loss over a wide log grid of candidate
outputs, refines the best cell by golden section, and compares the result
against the closed-form minimizer evaluated on the same sample moments.
It also evaluates the closed form on the model's exact moments and checks
it against the curvature-derived bias interval, which is the claim the
whole package exists to verify.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import ContractError, NumericError
from .jensen import BiasInterval, bias_interval
from .losses import LossSpec, closed_form_minimizer, loss_gradient, sample_moments, sweep_configs
from .noise_models import NoiseModel, expectation, make_noise_model, sample
from .search import count_local_minima, golden_section_minimize
from .tonemap import make_tonemap

BATTERY_Y_VALUES = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class SearchParams:
    """Grid and refinement settings for the empirical minimizer."""

    grid_points: int = 2048
    span_lo: float = 1e-6
    span_hi: float = 1e6
    refine_tol: float = 1e-6


@dataclass(frozen=True)
class OracleResult:
    empirical_argmin: float
    closed_form: float          # from the sampled moments (same sample set)
    closed_form_exact: float    # from the model's exact moments
    interval: BiasInterval
    mc_standard_error: float
    unimodal: bool
    excluded_grid_points: tuple
    n_samples: int


def derive_seed(root_seed: int, *parts) -> int:
    """Stable 64-bit sub-seed from a root seed and a textual key."""
    text = f"{root_seed}|" + "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _model_side_values(spec: LossSpec, v):
    """Model-side loss argument for a linear candidate output v.

    For both tone-mapped placements the minimizer search runs over linear
    outputs and maps through T; for target placement this is the monotone
    reparametrization u = T(v) of the tone-mapped output, which leaves the
    argmin (in linear scale) unchanged.
    """
    if spec.placement == "none":
        return np.asarray(v, dtype=np.float64)
    return spec.tonemap.value(v)


def _mean_loss_curve(spec: LossSpec, grid_linear, targets_u, weights):
    a = np.atleast_1d(_model_side_values(spec, grid_linear)).astype(np.float64)
    if spec.kind == "rmse":
        vals = kernels.mean_sq_weighted_on_grid(a, targets_u, weights)
    else:
        vals = kernels.mean_sq_on_grid(a, targets_u)
        if spec.kind in ("hdr", "hdr_star"):
            vals = vals / (a + spec.epsilon) ** 2
    return vals


def _score_samples(spec: LossSpec, v: float, raw_targets):
    """Per-sample d(loss)/d(linear output) at v; the estimating-equation score."""
    if spec.placement == "target":
        u = float(spec.tonemap.value(v))
        return loss_gradient(spec, u, raw_targets) * float(spec.tonemap.derivative(v))
    return loss_gradient(spec, v, raw_targets)


def _sandwich_se(spec: LossSpec, v_star: float, raw_targets) -> float:
    """Standard error of the argmin via the M-estimator sandwich.

    Var(argmin) ~ Var(score) / (n * slope^2) where the slope is the
    derivative of the mean score at the solution, estimated by central
    differences.  This uses no closed-form minimizer algebra.
    """
    scores = _score_samples(spec, v_star, raw_targets)
    sd = float(np.std(scores, ddof=1))
    r = 1e-4
    h = v_star * r
    g_hi = float(np.mean(_score_samples(spec, v_star + h, raw_targets)))
    g_lo = float(np.mean(_score_samples(spec, v_star - h, raw_targets)))
    slope = (g_hi - g_lo) / (2.0 * h)
    if not (slope > 0.0) or not math.isfinite(slope):
        raise NumericError(
            f"non-positive mean-score slope {slope} at argmin {v_star} "
            f"for {spec.label}"
        )
    return sd / (math.sqrt(scores.shape[0]) * slope)


_EXACT_MOMENT_CACHE: dict = {}


def exact_moments(spec: LossSpec, model: NoiseModel) -> dict:
    """Exact moments of the tone-mapped target for the closed-form minimizer.

    Identity-map mean and second moment come straight from the model's
    analytic moments; everything else is adaptive quadrature (or exact
    finite sums for the discrete families) at ~1e-12 relative accuracy.
    """
    tm = spec.tonemap if spec.placement != "none" else make_tonemap("identity")
    eps = spec.epsilon
    model_key = (model.family, model.mean, model.param, model.support_max)

    def _get(key, fn):
        cache_key = (model_key, tm.name, eps, key)
        if cache_key not in _EXACT_MOMENT_CACHE:
            _EXACT_MOMENT_CACHE[cache_key] = expectation(model, fn)
        return _EXACT_MOMENT_CACHE[cache_key]

    out = {}
    if tm.name == "identity":
        out["mean"] = model.mean
        out["second_moment"] = model.variance + model.mean**2
    else:
        out["mean"] = _get("mean", lambda x: float(tm.value(x)))
        out["second_moment"] = _get("second_moment", lambda x: float(tm.value(x)) ** 2)
    if spec.kind == "rmse":
        out["inv_sq"] = _get(
            "inv_sq", lambda x: 1.0 / (float(tm.value(x)) + eps) ** 2
        )
        out["ratio"] = _get(
            "ratio", lambda x: float(tm.value(x)) / (float(tm.value(x)) + eps) ** 2
        )
    return out


def _hdr_star_root(spec, grid, curve_scores, raw_targets, refine_tol):
    """Root of the mean frozen-denominator gradient along the grid.

    The frozen-denominator loss is trained by following its modified
    gradient, so the quantity to verify is the fixed point of that flow,
    not the argmin of the (unmodified) loss values.
    """
    sign = np.sign(curve_scores)
    flips = np.nonzero(np.diff(sign) > 0)[0]
    if flips.size == 0:
        raise NumericError("mean modified gradient has no sign change on the grid")
    k = int(flips[0])
    lo, hi = float(grid[k]), float(grid[k + 1])

    def mean_score(v):
        return float(np.mean(_score_samples(spec, v, raw_targets)))

    while (hi - lo) > refine_tol * hi:
        mid = math.sqrt(lo * hi)
        if mean_score(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), int(flips.size)


def empirical_minimizer(
    spec: LossSpec,
    model: NoiseModel,
    seed: int,
    n_samples: int = 1_000_000,
    search: SearchParams = SearchParams(),
) -> OracleResult:
    """Sampled-loss minimization compared against the closed forms.

    A single sample set is shared across every candidate output (common
    random numbers), which makes the sampled argmin well defined.  Grid
    points where the loss overflows are excluded and reported rather than
    fatal.  Pseudoconvexity is checked, not assumed: the scan counts local
    minima and flags violations.
    """
    if n_samples < 10_000:
        raise ContractError(f"n_samples must be >= 1e4, got {n_samples}")
    raw = sample(model, seed, n_samples)
    if spec.placement == "none":
        targets_u = raw
    else:
        targets_u = spec.tonemap.value(raw)
    weights = (
        1.0 / (targets_u + spec.epsilon) ** 2 if spec.kind == "rmse" else None
    )

    y = model.mean
    grid = np.geomspace(search.span_lo * y, search.span_hi * y, search.grid_points)

    if spec.kind == "hdr_star":
        curve = np.array(
            [float(np.mean(_score_samples(spec, float(v), raw))) for v in
             np.geomspace(search.span_lo * y, search.span_hi * y, 256)]
        )
        coarse = np.geomspace(search.span_lo * y, search.span_hi * y, 256)
        root, n_flips = _hdr_star_root(spec, coarse, curve, raw, search.refine_tol)
        v_star = root
        unimodal = n_flips == 1
        excluded: tuple = ()
    else:
        curve = _mean_loss_curve(spec, grid, targets_u, weights)
        finite = np.isfinite(curve)
        excluded = tuple(grid[~finite].tolist())
        if not np.any(finite):
            raise NumericError(f"mean loss non-finite on the whole grid for {spec.label}")
        masked = np.where(finite, curve, np.inf)
        unimodal = count_local_minima(curve[finite]) == 1
        k = int(np.argmin(masked))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, search.grid_points - 1)]

        def scalar_loss(v):
            return float(_mean_loss_curve(spec, np.array([v]), targets_u, weights)[0])

        # The minimizer can fall outside the scan span: a mass of exactly-zero
        # targets pulls the normalized losses toward zero output, far below
        # span_lo * y once a compressive map is inverted.  The sampled mean
        # loss stays unimodal there (quadratic in tone-mapped space), so the
        # bracket is extended whenever the refinement pins to its edge.
        v_star, _ = golden_section_minimize(scalar_loss, lo, hi, search.refine_tol)
        for _ in range(8):
            edge = 100.0 * search.refine_tol
            if v_star <= lo * (1.0 + edge) and lo > 1e-250:
                lo *= 1e-6
            elif v_star >= hi * (1.0 - edge) and hi < 1e250:
                hi *= 1e6
            else:
                break
            v_star, _ = golden_section_minimize(scalar_loss, lo, hi, search.refine_tol)

    closed_sampled = closed_form_minimizer(spec, sample_moments(spec, raw)).value
    closed_exact = closed_form_minimizer(spec, exact_moments(spec, model)).value
    interval = bias_interval(spec, y, model.variance)
    se = _sandwich_se(spec, v_star, raw)

    return OracleResult(
        empirical_argmin=float(v_star),
        closed_form=float(closed_sampled),
        closed_form_exact=float(closed_exact),
        interval=interval,
        mc_standard_error=float(se),
        unimodal=bool(unimodal),
        excluded_grid_points=excluded,
        n_samples=n_samples,
    )


# ---------------------------------------------------------------------------
# The battery
# ---------------------------------------------------------------------------

def battery_models(y: float) -> tuple[NoiseModel, ...]:
    """The five-family noise battery at one clean-target level."""
    return (
        make_noise_model("gamma", y, param=2.0),
        make_noise_model("lognormal", y, param=1.0),
        make_noise_model("scaled_bernoulli", y, support_max=4.0 * y),
        make_noise_model("two_point", y),
        make_noise_model("clipped_lognormal", y, param=1.0, support_max=20.0 * y),
    )


def containment_tolerance(result: OracleResult) -> float:
    """Tolerance for the exact closed form vs the bias interval.

    A 1e-9 relative floor covers quadrature and assembly roundoff, doubled
    when a numerically evaluated coefficient entered the interval.
    """
    scale = max(1.0, abs(result.closed_form_exact))
    tol = 1e-9 * scale
    if result.interval.method != "analytic":
        tol += 1e-9 * scale
    return tol


@dataclass(frozen=True)
class BatteryCell:
    spec: LossSpec
    model: NoiseModel
    result: OracleResult
    agreement_ok: bool
    containment_ok: bool

    @property
    def ok(self) -> bool:
        return self.agreement_ok and self.containment_ok


def run_battery_cell(spec: LossSpec, model: NoiseModel, seed: int,
                     n_samples: int, search: SearchParams) -> BatteryCell:
    res = empirical_minimizer(spec, model, seed, n_samples, search)
    agreement = abs(res.empirical_argmin - res.closed_form) <= 3.0 * res.mc_standard_error
    containment = res.interval.contains(
        res.closed_form_exact, containment_tolerance(res)
    )
    return BatteryCell(spec, model, res, bool(agreement), bool(containment))


def run_battery(
    root_seed: int = 20240801,
    n_samples: int = 1_000_000,
    y_values: Sequence[float] = BATTERY_Y_VALUES,
    epsilon: float = 0.01,
    search: SearchParams = SearchParams(),
    specs: Optional[Sequence[LossSpec]] = None,
    families: Optional[Sequence[str]] = None,
) -> list[BatteryCell]:
    """Every loss configuration crossed with every noise model and y level.

    Cells get independent derived seeds keyed by their identity, so any
    subset or ordering of cells reproduces the full run's numbers.
    """
    if specs is None:
        specs = sweep_configs(epsilon)
    cells = []
    for y in y_values:
        models = battery_models(float(y))
        if families is not None:
            models = tuple(m for m in models if m.family in families)
        for model in models:
            for spec in specs:
                seed = derive_seed(root_seed, spec.label, model.family, y)
                cells.append(run_battery_cell(spec, model, seed, n_samples, search))
    return cells


def battery_csv_rows(cells: Sequence[BatteryCell]) -> list[dict]:
    rows = []
    for c in cells:
        rows.append(
            {
                "spec": c.spec.kind,
                "placement": c.spec.placement,
                "tonemap": c.spec.tonemap.name,
                "family": c.model.family,
                "y": c.model.mean,
                "var": c.model.variance,
                "empirical_argmin": c.result.empirical_argmin,
                "closed_form": c.result.closed_form,
                "lower": c.result.interval.lower,
                "upper": c.result.interval.upper,
                "mc_se": c.result.mc_standard_error,
                "pass": c.ok,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Finite-data decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteDataReport:
    n_terms: int
    n_trials: int
    empirical: float
    closed_form: float
    standard_error: float

    @property
    def ok(self) -> bool:
        return abs(self.empirical - self.closed_form) <= 4.0 * self.standard_error


def finite_data_check(
    models: Sequence[NoiseModel],
    error_means: Sequence[float],
    error_vars: Sequence[float],
    n_trials: int = 20_000,
    seed: int = 0,
) -> FiniteDataReport:
    """Expected squared error of the averaged noisy-plus-error targets.

    Empirically measures E[((1/N) sum y_i - (1/N) sum (yhat_i + e_i))^2]
    over independent trials and compares it against the closed form
    (1/N) * avg(Var(yhat_i) + Var(e_i)) + (avg E[e_i])^2, which splits the
    error into a variance part that shrinks with N and a bias part that
    does not.
    """
    n = len(models)
    if not (len(error_means) == len(error_vars) == n) or n < 1:
        raise ContractError(
            f"need equal-length nonempty lists, got {n}, {len(error_means)}, "
            f"{len(error_vars)}"
        )
    clean_mean = float(np.mean([m.mean for m in models]))
    rng = np.random.Generator(np.random.Philox(key=derive_seed(seed, "finite_data")))
    acc = np.zeros(n_trials)
    for i, model in enumerate(models):
        draws = sample(model, derive_seed(seed, "finite_data", i), n_trials)
        errs = error_means[i] + math.sqrt(error_vars[i]) * rng.standard_normal(n_trials)
        acc += draws + errs
    sq = (clean_mean - acc / n) ** 2
    empirical = float(np.mean(sq))
    se = float(np.std(sq, ddof=1) / math.sqrt(n_trials))
    closed = float(
        np.mean([m.variance for m in models]) / n
        + np.mean(error_vars) / n
        + np.mean(error_means) ** 2
    )
    return FiniteDataReport(n, n_trials, empirical, closed, se)
