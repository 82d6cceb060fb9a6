"""Backend parity and determinism for the hot mean-loss kernels."""

import numpy as np
import pytest

from tonegap import backend, kernels


@pytest.fixture
def workload():
    rng = np.random.default_rng(1)
    targets = rng.gamma(2.0, 0.5, 50_000)
    weights = 1.0 / (targets + 0.01) ** 2
    grid = np.geomspace(1e-6, 1e6, 128)
    return grid, targets, weights


def run_both(fn, *arrays):
    prev = backend.get_backend()
    try:
        backend.set_backend("numpy")
        a = fn(*arrays)
        if backend.HAS_NUMBA:
            backend.set_backend("numba")
            b = fn(*arrays)
        else:  # pragma: no cover
            b = a
    finally:
        backend.set_backend(prev)
    return a, b


class TestBackends:
    def test_env_default_is_valid(self):
        assert backend.get_backend() in ("numba", "numpy")

    def test_invalid_backend_rejected(self):
        with pytest.raises(ValueError):
            backend.set_backend("torch")

    def test_mean_sq_backends_agree(self, workload):
        grid, targets, _ = workload
        a, b = run_both(kernels.mean_sq_on_grid, grid, targets)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_weighted_backends_agree(self, workload):
        grid, targets, weights = workload
        a, b = run_both(kernels.mean_sq_weighted_on_grid, grid, targets, weights)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_kernels_are_literal_loss_averages(self, workload):
        """The blocked kernels equal the one-shot numpy mean exactly in math."""
        grid, targets, weights = workload
        ref = np.array([np.mean((a - targets) ** 2 * weights) for a in grid[:8]])
        got = kernels.mean_sq_weighted_on_grid(grid[:8], targets, weights)
        np.testing.assert_allclose(got, ref, rtol=1e-12)

    def test_each_backend_is_deterministic(self, workload):
        grid, targets, weights = workload
        for name in ("numpy",) + (("numba",) if backend.HAS_NUMBA else ()):
            prev = backend.set_backend(name)
            try:
                x = kernels.mean_sq_weighted_on_grid(grid, targets, weights)
                y = kernels.mean_sq_weighted_on_grid(grid, targets, weights)
                np.testing.assert_array_equal(x, y)
            finally:
                backend.set_backend(prev)
