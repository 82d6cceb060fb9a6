"""Per-pixel SGD trainer: convergence, determinism, clipping, and bias checks."""

import numpy as np
import pytest

from tonegap.errors import ContractError
from tonegap.losses import LossSpec, closed_form_minimizer
from tonegap.noise_models import make_noise_model
from tonegap.oracle import exact_moments
from tonegap.jensen import bias_interval
from tonegap.tonemap import make_tonemap
from tonegap.trainer import (
    SyntheticField,
    TrainConfig,
    make_field,
    train,
    validation_rmse,
)


def small_field(**kw):
    defaults = dict(n_pixels=128, seed=5)
    defaults.update(kw)
    return make_field(**defaults)


class TestValidationMetric:
    def test_zero_on_exact_estimates(self):
        clean = np.array([0.1, 1.0, 10.0])
        assert validation_rmse(clean, clean) == 0.0

    def test_proportional_offset_identity(self):
        clean = np.array([0.05, 0.5, 5.0])
        est = clean + 0.1 * (clean + 0.01)
        assert validation_rmse(est, clean) == pytest.approx(0.01, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            validation_rmse(np.ones(3), np.ones(4))

    def test_noisy_baseline_regression_value(self):
        """Frozen reference for the default field's noisy-input error level."""
        field = make_field(1024, seed=7)
        run = train(field, LossSpec("l2"), TrainConfig(steps=1, seed=1))
        assert run.baseline_rmse == pytest.approx(19.542389487994917, rel=1e-9)


class TestFieldConstruction:
    def test_band_limits(self):
        field = make_field(4096, seed=0)
        assert field.clean.min() >= field.y_min
        assert field.clean.max() <= field.y_max

    def test_invalid_band(self):
        with pytest.raises(ContractError):
            make_field(16, y_min=1.0, y_max=0.5)

    def test_noise_is_mean_preserving(self):
        field = small_field(noise_rel_var=2.0)
        rng = np.random.Generator(np.random.Philox(key=1))
        clean = np.full(200_000, 0.06)
        draws = field.draw_targets(rng, clean)
        se = draws.std(ddof=1) / np.sqrt(draws.shape[0])
        assert abs(draws.mean() - 0.06) <= 4 * se


class TestTraining:
    def test_rejects_bad_config(self):
        field = small_field()
        with pytest.raises(ContractError):
            train(field, LossSpec("l2"), TrainConfig(steps=0))
        with pytest.raises(ContractError):
            train(field, LossSpec("l2"), TrainConfig(lr=0.0))

    def test_noiseless_targets_recover_the_field(self):
        """With vanishing noise the estimates converge onto the clean values."""
        field = SyntheticField(
            clean=small_field().clean, noise_rel_var=1e-18, y_min=0.04, y_max=0.09
        )
        cfg = TrainConfig(steps=6000, lr=0.05, batch=64, seed=3)
        run = train(field, LossSpec("l2"), cfg)
        assert not run.diverged
        np.testing.assert_allclose(run.final_estimates, field.clean, atol=1e-6)

    def test_bitwise_deterministic(self):
        field = small_field()
        spec = LossSpec("hdr", "both", tonemap=make_tonemap("reinhard_gamma"))
        cfg = TrainConfig(steps=500, seed=11)
        a = train(field, spec, cfg)
        b = train(field, spec, cfg)
        np.testing.assert_array_equal(a.curve_val_rmse, b.curve_val_rmse)
        np.testing.assert_array_equal(a.curve_train_loss, b.curve_train_loss)
        np.testing.assert_array_equal(a.final_estimates, b.final_estimates)
        c = train(field, spec, TrainConfig(steps=500, seed=12))
        assert not np.array_equal(a.final_estimates, c.final_estimates)

    def test_post_clip_norms_respect_the_threshold(self):
        field = small_field(noise_rel_var=40.0)
        cfg = TrainConfig(steps=400, lr=1e-5, batch=64, clip=50.0, seed=2)
        run = train(field, LossSpec("l2"), cfg)
        applied = np.minimum(run.curve_grad_norm_preclip, cfg.clip)
        assert np.all(applied <= cfg.clip)
        assert run.max_grad_norm_preclip > cfg.clip  # clipping actually engaged

    def test_target_placement_estimates_reported_in_linear_scale(self):
        field = small_field()
        spec = LossSpec("l2", "target", tonemap=make_tonemap("reinhard"))
        run = train(field, spec, TrainConfig(steps=300, seed=4))
        assert np.all(run.final_estimates >= 0.0)
        assert np.all(np.isfinite(run.final_estimates))


class TestConvergedBias:
    def test_tone_mapped_estimates_match_per_pixel_closed_form(self):
        """Mean signed gap between trained estimates and the exact minimizers
        vanishes within Monte Carlo error."""
        field = make_field(256, seed=9)
        spec = LossSpec("l2", "both", tonemap=make_tonemap("reinhard"))
        run = train(field, spec, TrainConfig(steps=120_000, lr=2e-4, batch=256, seed=6))
        assert not run.diverged

        targets = {}
        for y in np.unique(field.clean):
            model = make_noise_model("lognormal", float(y), param=field.noise_rel_var)
            targets[float(y)] = closed_form_minimizer(
                spec, exact_moments(spec, model)
            ).value
        want = np.array([targets[float(y)] for y in field.clean])
        dev = run.final_estimates - want
        se = dev.std(ddof=1) / np.sqrt(dev.shape[0])
        assert abs(float(dev.mean())) <= 3 * se + 1e-4

    def test_mean_deviation_inside_interval_envelope(self):
        """Averaged signed bias of a converged run stays inside the averaged
        curvature-bound envelope."""
        field = make_field(256, seed=9)
        spec = LossSpec("hdr", "both", tonemap=make_tonemap("reinhard_gamma"))
        run = train(field, spec, TrainConfig(steps=120_000, lr=2e-4, batch=256, seed=8))
        assert not run.diverged
        lows, highs = [], []
        for y in field.clean:
            model = make_noise_model("lognormal", float(y), param=field.noise_rel_var)
            iv = bias_interval(spec, float(y), model.variance)
            lows.append(iv.lower - y)
            highs.append(iv.upper - y)
        dev = run.final_estimates - field.clean
        se = dev.std(ddof=1) / np.sqrt(dev.shape[0])
        assert float(np.mean(lows)) - 3 * se <= float(dev.mean()) <= float(
            np.mean(highs)
        ) + 3 * se
