"""Hot loops for the Monte Carlo oracle: mean loss across a grid of outputs.

The single expensive operation in this package is evaluating, for every
candidate output value a on a grid, the average over a common random
sample set of (a - t_i)^2 or (a - t_i)^2 * w_i.  The numba kernels below
process the samples in fixed-size blocks (cache tiling) with a sequential
accumulation order per grid point, so results are bitwise reproducible
regardless of compilation details; the numpy fallback does the same
blocked literal averaging without compilation.
"""

from __future__ import annotations

import numpy as np

from . import backend

_BLOCK = 16384


# --- numpy fallback ----------------------------------------------------------

def _mean_sq_numpy(grid: np.ndarray, targets: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.shape[0])
    buf = np.empty(targets.shape[0])
    for j, a in enumerate(grid):
        np.subtract(a, targets, out=buf)
        np.multiply(buf, buf, out=buf)
        out[j] = buf.mean()
    return out


def _mean_sq_weighted_numpy(
    grid: np.ndarray, targets: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    out = np.zeros(grid.shape[0])
    buf = np.empty(targets.shape[0])
    for j, a in enumerate(grid):
        np.subtract(a, targets, out=buf)
        np.multiply(buf, buf, out=buf)
        np.multiply(buf, weights, out=buf)
        out[j] = buf.mean()
    return out


# --- numba kernels -----------------------------------------------------------

if backend.HAS_NUMBA:
    from numba import njit

    @njit(fastmath=True, cache=True)
    def _mean_sq_numba(grid, targets, out):  # pragma: no cover - compiled
        n = targets.shape[0]
        m = grid.shape[0]
        for j in range(m):
            out[j] = 0.0
        for start in range(0, n, _BLOCK):
            stop = min(start + _BLOCK, n)
            for j in range(m):
                a = grid[j]
                acc = 0.0
                for i in range(start, stop):
                    r = a - targets[i]
                    acc += r * r
                out[j] += acc
        for j in range(m):
            out[j] /= n

    @njit(fastmath=True, cache=True)
    def _mean_sq_weighted_numba(grid, targets, weights, out):  # pragma: no cover
        n = targets.shape[0]
        m = grid.shape[0]
        for j in range(m):
            out[j] = 0.0
        for start in range(0, n, _BLOCK):
            stop = min(start + _BLOCK, n)
            for j in range(m):
                a = grid[j]
                acc = 0.0
                for i in range(start, stop):
                    r = a - targets[i]
                    acc += r * r * weights[i]
                out[j] += acc
        for j in range(m):
            out[j] /= n


def mean_sq_on_grid(grid, targets) -> np.ndarray:
    """mean_i (grid[j] - targets[i])^2 for every grid point j."""
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if backend.get_backend() == "numba":
        out = np.empty(grid.shape[0])
        _mean_sq_numba(grid, targets, out)
        return out
    return _mean_sq_numpy(grid, targets)


def mean_sq_weighted_on_grid(grid, targets, weights) -> np.ndarray:
    """mean_i (grid[j] - targets[i])^2 * weights[i] for every grid point j."""
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if backend.get_backend() == "numba":
        out = np.empty(grid.shape[0])
        _mean_sq_weighted_numba(grid, targets, weights, out)
        return out
    return _mean_sq_weighted_numpy(grid, targets, weights)
