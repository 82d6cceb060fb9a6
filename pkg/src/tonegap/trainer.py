"""Toy per-pixel trainer: stochastic gradient descent against noisy targets.

Each pixel of a synthetic high-dynamic-range field carries one free scalar
estimate, trained by plain constant-rate SGD on freshly drawn noisy targets
(the clean values are never shown to the training loss).  This isolates the
loss/tone-map combination's bias and stability from any model-architecture
effects: exploding gradients, divergence, and the final validation error
are properties of the loss landscape alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError
from .losses import LossSpec, loss_gradient, loss_value, sweep_configs
from .oracle import derive_seed


@dataclass(frozen=True)
class SyntheticField:
    """Clean per-pixel radiances plus the per-pixel noise description.

    Targets are multiplicative lognormal around each clean value with a
    common relative variance, matching the lognormal noise-model family
    instantiated per pixel, plus a small probability of a firefly (an
    outlier sample several times brighter, the signature failure mode of
    low-sample-count path tracing).  The mixture is renormalized so the
    target mean stays exactly on the clean value.
    """

    clean: np.ndarray
    noise_rel_var: float
    y_min: float
    y_max: float
    firefly_prob: float = 0.0
    firefly_scale: float = 8.0

    @property
    def n_pixels(self) -> int:
        return self.clean.shape[0]

    def noise_sigma(self) -> float:
        return math.sqrt(math.log1p(self.noise_rel_var))

    def draw_targets(self, rng: np.random.Generator, clean_values: np.ndarray):
        s = self.noise_sigma()
        n = clean_values.shape[0]
        z = rng.lognormal(-0.5 * s * s, s, n)
        if self.firefly_prob > 0.0:
            boost = np.where(rng.random(n) < self.firefly_prob, self.firefly_scale, 1.0)
            z = z * boost / (1.0 + self.firefly_prob * (self.firefly_scale - 1.0))
        return clean_values * z


def make_field(
    n_pixels: int = 1024,
    seed: int = 0,
    y_min: float = 0.04,
    y_max: float = 0.09,
    log_median: float = 0.06,
    log_sigma: float = 0.3,
    noise_rel_var: float = 40.0,
) -> SyntheticField:
    """Synthetic field whose dynamic range lives in the noise.

    Clean radiances occupy a narrow dim band (lognormal around
    `log_median`, clipped to [y_min, y_max]); the heavy tail comes from the
    multiplicative noise, whose relative variance of 40 makes the observed
    targets span about seven orders of magnitude, the outlier regime where
    plain squared-error training degrades.
    """
    if not (0.0 < y_min < y_max):
        raise ContractError(f"need 0 < y_min < y_max, got {y_min}, {y_max}")
    rng = np.random.Generator(np.random.Philox(key=derive_seed(seed, "field")))
    clean = np.exp(math.log(log_median) + log_sigma * rng.standard_normal(n_pixels))
    clean = np.clip(clean, y_min, y_max)
    return SyntheticField(clean, noise_rel_var, y_min, y_max)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 18000
    lr: float = 7.5e-6
    batch: int = 512
    clip: float = 1e3
    seed: int = 0
    checkpoints: int = 200


@dataclass(frozen=True)
class TrainRun:
    spec: LossSpec
    config: TrainConfig
    curve_step: np.ndarray
    curve_train_loss: np.ndarray
    curve_grad_norm_preclip: np.ndarray
    curve_val_rmse: np.ndarray
    final_estimates: np.ndarray  # linear scale
    baseline_rmse: float
    skipped_steps: int
    diverged: bool
    max_grad_norm_preclip: float  # over every step, not just checkpoints
    median_grad_norm_preclip: float

    @property
    def final_val_rmse(self) -> float:
        return float(self.curve_val_rmse[-1])


def validation_rmse(estimates, clean, epsilon: float = 0.01) -> float:
    """Mean relative squared error against the clean field (never tone-mapped)."""
    estimates = np.asarray(estimates, dtype=np.float64)
    clean = np.asarray(clean, dtype=np.float64)
    if estimates.shape != clean.shape:
        raise ContractError(
            f"shape mismatch: {estimates.shape} vs {clean.shape}"
        )
    return float(np.mean((estimates - clean) ** 2 / (clean + epsilon) ** 2))


def _to_linear(spec: LossSpec, estimates: np.ndarray) -> np.ndarray:
    if spec.placement != "target":
        return estimates
    return np.asarray(spec.tonemap.inverse(estimates), dtype=np.float64)


def _estimate_ceiling(spec: LossSpec) -> float:
    # Target-placement estimates live in tone-mapped space and must stay
    # strictly inside the map's image for the inverse to exist.
    if spec.placement == "target" and spec.tonemap.output_bound is not None:
        return spec.tonemap.output_bound * (1.0 - 1e-12)
    return np.inf


def train(field: SyntheticField, spec: LossSpec, config: TrainConfig) -> TrainRun:
    """SGD over per-pixel estimates with global-norm gradient clipping.

    Every step draws a fresh noisy target for each sampled pixel.  The
    pre-clip gradient norm is recorded at checkpoints; non-finite gradients
    skip the step (counted, and > 1% skipped marks the run diverged).
    Estimates are kept nonnegative by projection.
    """
    if config.steps < 1:
        raise ContractError(f"steps must be >= 1, got {config.steps}")
    if not (config.lr > 0.0):
        raise ContractError(f"lr must be > 0, got {config.lr}")
    rng = np.random.Generator(
        np.random.Philox(key=derive_seed(config.seed, "train", spec.label))
    )
    clean = field.clean
    n = clean.shape[0]

    noisy_input = field.draw_targets(rng, clean)
    baseline = validation_rmse(noisy_input, clean)
    # Cold start from a dim constant frame (half the darkest clean value).
    # Seeding from the raw noisy input would park the heavy upper noise tail
    # in the region where compressive maps have no usable gradient, and the
    # lower tail where their derivative diverges.
    init_value = 0.5 * field.y_min
    if spec.placement == "target":
        estimates = np.full(n, float(spec.tonemap.value(init_value)))
    else:
        estimates = np.full(n, init_value)
    ceiling = _estimate_ceiling(spec)
    estimates = np.minimum(estimates, ceiling)
    # Nonnegativity projection, kept a hair inside the orthant: the
    # gamma-family maps have T'(0) = inf, so an estimate parked exactly at
    # zero would emit non-finite gradients forever.
    floor = 0.0 if spec.placement == "target" else 0.25 * field.y_min

    every = max(1, config.steps // config.checkpoints)
    rec_step, rec_loss, rec_norm, rec_val = [], [], [], []
    norms = np.zeros(config.steps)
    skipped = 0
    last_norm = 0.0

    for step in range(1, config.steps + 1):
        idx = rng.integers(0, n, config.batch)
        targets = field.draw_targets(rng, clean[idx])
        est_b = estimates[idx]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            grads = loss_gradient(spec, est_b, targets)
            norm = float(np.sqrt(np.sum(grads * grads)))
        if math.isfinite(norm):
            last_norm = norm
            norms[step - 1] = norm
            if norm > config.clip:
                grads = grads * (config.clip / norm)
            est_new = est_b - config.lr * grads
            np.clip(est_new, floor, ceiling, out=est_new)
            estimates[idx] = est_new
        else:
            skipped += 1
            norms[step - 1] = np.nan

        if step % every == 0 or step == config.steps:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                batch_loss = float(
                    np.mean(loss_value(spec, estimates[idx], targets))
                )
            rec_step.append(step)
            rec_loss.append(batch_loss)
            rec_norm.append(last_norm)
            rec_val.append(validation_rmse(_to_linear(spec, estimates), clean))

    finite_norms = norms[np.isfinite(norms)]
    return TrainRun(
        spec=spec,
        config=config,
        curve_step=np.asarray(rec_step, dtype=np.int64),
        curve_train_loss=np.asarray(rec_loss),
        curve_grad_norm_preclip=np.asarray(rec_norm),
        curve_val_rmse=np.asarray(rec_val),
        final_estimates=_to_linear(spec, estimates),
        baseline_rmse=baseline,
        skipped_steps=skipped,
        diverged=skipped > 0.01 * config.steps,
        max_grad_norm_preclip=float(np.max(finite_norms)) if finite_norms.size else np.nan,
        median_grad_norm_preclip=float(np.median(finite_norms)) if finite_norms.size else np.nan,
    )


def run_sweep(
    field: SyntheticField,
    config: TrainConfig,
    epsilon: float = 0.01,
    specs: Optional[tuple[LossSpec, ...]] = None,
) -> dict[str, TrainRun]:
    """All 22 loss/tone-map configurations trained on one field."""
    if specs is None:
        specs = sweep_configs(epsilon)
    return {spec.label: train(field, spec, config) for spec in specs}
