"""Acceptance suite: every verification criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with `pytest -s` to see them live).
The Monte Carlo battery and the training sweep are the heavy parts; the
whole module takes on the order of fifteen minutes on one core.
"""

import time

import numpy as np
import pytest

from tonegap.cli import main as cli_main, verify_table
from tonegap.jensen import STAR_ROWS, TABLE_ROWS, make_phi, numeric_j
from tonegap.losses import LossSpec, loss_gradient, loss_value, sweep_configs
from tonegap.noise_models import bhatia_davis_bound, make_noise_model
from tonegap.oracle import (
    battery_models,
    containment_tolerance,
    derive_seed,
    empirical_minimizer,
    finite_data_check,
    run_battery,
)
from tonegap.tonemap import make_tonemap
from tonegap.trainer import TrainConfig, make_field, run_sweep

SEED = 20240801


def report(n, ok, detail=""):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    return ok


@pytest.fixture(scope="module")
def battery():
    t0 = time.perf_counter()
    cells = run_battery(root_seed=SEED, n_samples=1_000_000)
    elapsed = time.perf_counter() - t0
    return cells, elapsed


@pytest.fixture(scope="module")
def sweeps():
    field = make_field(1024, seed=7)
    t0 = time.perf_counter()
    out = [
        run_sweep(field, TrainConfig(seed=derive_seed(0, "sweep", k)))
        for k in range(5)
    ]
    return out, time.perf_counter() - t0


def test_criterion_01_table_verification():
    """Numeric inf/sup matches every closed form on the 50-point grid."""
    t0 = time.perf_counter()
    ok, details, status = verify_table(
        epsilon=0.01, abs_tol=1e-5, rel_tol=1e-4, y_points=50
    )
    elapsed = time.perf_counter() - t0
    n_checked = sum(1 for d in details if d[6] != "SKIPPED-ANALYTIC")
    assert report(
        1, ok, f"{n_checked} comparisons over {len(TABLE_ROWS)} rows in {elapsed:.0f}s"
        f" (target < 60s)"
    )


def test_criterion_02_square_special_case():
    """The square nonlinearity has unit coefficients on both sides."""
    phi = make_phi("square")
    worst = 0.0
    for y in np.geomspace(1e-2, 1e2, 50):
        nj = numeric_j(phi, float(y))
        worst = max(worst, abs(nj.j_minus - 1.0), abs(nj.j_plus - 1.0))
    assert report(2, worst <= 1e-9, f"worst |J - 1| = {worst:.2e}")


def test_criterion_03_battery_agreement(battery):
    """Sampled argmin within three propagated standard errors of the closed
    form on every battery cell."""
    cells, elapsed = battery
    bad = [c for c in cells if not c.agreement_ok]
    detail = f"{len(cells)} cells in {elapsed:.0f}s (target < 600s)"
    for c in bad:
        detail += f"; FAIL {c.spec.label}/{c.model.family}/y={c.model.mean}"
    assert report(3, not bad and len(cells) == 330, detail)


def test_criterion_04_dispersion_point_check():
    """Output-normalized loss at tiny epsilon lands on mean + var/mean."""
    res = empirical_minimizer(
        LossSpec("hdr", epsilon=1e-8),
        make_noise_model("gamma", 2.0, param=4.0),
        derive_seed(SEED, "dispersion-point"),
        1_000_000,
    )
    dev = abs(res.empirical_argmin - 2.5)
    ok = dev <= 3.0 * res.mc_standard_error
    assert report(
        4, ok, f"argmin {res.empirical_argmin:.6f}, dev {dev / res.mc_standard_error:.2f} SE"
    )


def test_criterion_05_bound_containment(battery):
    """Exact closed-form minimizer inside the bias interval in every cell."""
    cells, _ = battery
    bad = [c for c in cells if not c.containment_ok]
    worst = 0.0
    for c in cells:
        iv, v = c.result.interval, c.result.closed_form_exact
        slack = max(iv.lower - v, v - iv.upper)
        worst = max(worst, slack / containment_tolerance(c.result))
    detail = f"worst slack {worst:.3g}x tolerance"
    for c in bad:
        detail += f"; FAIL {c.spec.label}/{c.model.family}/y={c.model.mean}"
    assert report(5, not bad, detail)


def test_criterion_06_bounded_variance_bound():
    """Two-point-at-the-extremes noise attains (M - y) y; all bounded
    families respect it; the parabola peaks at M^2/4."""
    ok = True
    for y in (0.1, 1.0, 10.0):
        m = make_noise_model("scaled_bernoulli", y, support_max=4.0 * y)
        ok &= m.variance == bhatia_davis_bound(y, 4.0 * y)
        for model in battery_models(y):
            if model.support_max is not None:
                ok &= model.variance <= bhatia_davis_bound(
                    model.mean, model.support_max
                ) * (1.0 + 1e-12)
    ok &= bhatia_davis_bound(2.0, 4.0) == 4.0
    ys = np.linspace(0.0, 4.0, 401)
    vals = [bhatia_davis_bound(float(v), 4.0) for v in ys]
    ok &= int(np.argmax(vals)) == 200 and max(vals) == 4.0
    assert report(6, ok)


def test_criterion_07_finite_data_decomposition():
    """Empirical squared error of averaged noisy targets matches
    variance/N + bias^2, and halves when N doubles at zero bias."""
    ok = True
    detail = []
    for n in (1, 10, 100):
        models = [make_noise_model("gamma", 1.0, param=2.0)] * n
        rep = finite_data_check(
            models, [0.1] * n, [0.05] * n, n_trials=40_000,
            seed=derive_seed(SEED, "fd", n),
        )
        ok &= rep.ok
        detail.append(f"N={n}: {abs(rep.empirical - rep.closed_form) / rep.standard_error:.2f} SE")
    halves = []
    for n in (10, 20, 50, 100):
        models = [make_noise_model("gamma", 1.0, param=2.0)] * n
        rep = finite_data_check(
            models, [0.0] * n, [0.0] * n, n_trials=60_000,
            seed=derive_seed(SEED, "fd0", n),
        )
        halves.append((n, rep.empirical))
    for (n1, e1), (n2, e2) in [(halves[0], halves[1]), (halves[2], halves[3])]:
        ratio = e2 / e1
        ok &= abs(ratio - 0.5) <= 0.05
        detail.append(f"{n1}->{n2}: ratio {ratio:.3f}")
    assert report(7, ok, "; ".join(detail))


def test_criterion_08_trainer_qualitative(sweeps):
    """Stability and model-selection ordering across five seeds."""
    runs_by_seed, elapsed = sweeps
    contenders = [
        "l2+reinhard/both", "l2+reinhard_gamma/both",
        "hdr+reinhard/both", "hdr+reinhard_gamma/both",
    ]
    l2_tone_mapped = [
        f"l2+{m}/{p}"
        for m in ("reinhard", "gamma", "reinhard_gamma")
        for p in ("target", "both")
    ]
    ok_stable = True
    ok_norm = True
    hero_wins = 0
    details = []
    for k, runs in enumerate(runs_by_seed):
        base = next(iter(runs.values())).baseline_rmse
        for label in contenders:
            r = runs[label]
            ok_stable &= (not r.diverged) and r.final_val_rmse < base
        ref = float(np.median([runs[c].median_grad_norm_preclip for c in l2_tone_mapped]))
        ratio = runs["l2"].max_grad_norm_preclip / ref
        ok_norm &= ratio >= 10.0
        alive = {l: r for l, r in runs.items() if not r.diverged}
        best = min(alive, key=lambda l: alive[l].final_val_rmse)
        hero_wins += best == "hdr+reinhard_gamma/both"
        details.append(f"seed{k}: best={best}, norm ratio {ratio:.0f}x")
    ok_rank = hero_wins >= 4
    ok = ok_stable and ok_norm and ok_rank
    assert report(
        8, ok,
        f"(i) stable={ok_stable}, (ii) norms={ok_norm}, "
        f"(iii) wins={hero_wins}/5, {elapsed:.0f}s (target < 900s); "
        + "; ".join(details),
    )


def test_criterion_09_gradient_correctness():
    """Gradients against Richardson central differences for every spec;
    the frozen-denominator variant against three hand-computed points."""
    rng = np.random.default_rng(13)
    worst = 0.0
    for spec in sweep_configs():
        if spec.kind == "hdr_star":
            continue
        v = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), 1000))
        t = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), 1000))
        h = v * 1e-3

        def central(step):
            return (
                loss_value(spec, v + step, t) - loss_value(spec, v - step, t)
            ) / (2 * step)

        fd = (4.0 * central(h / 2) - central(h)) / 3.0
        grad = loss_gradient(spec, v, t)
        scale = np.maximum(np.maximum(np.abs(grad), np.abs(fd)), 1e-300)
        worst = max(worst, float(np.max(np.abs(grad - fd) / scale)))
    ok = worst <= 1e-5

    star = LossSpec("hdr_star", epsilon=0.01)
    hand = [
        (1.0, 0.5, 2.0 * 0.5 / 1.01**2),
        (2.0, 5.0, 2.0 * -3.0 / 2.01**2),
        (0.0, 1.0, 2.0 * -1.0 / 0.01**2),
    ]
    for v, t, expected in hand:
        ok &= loss_gradient(star, v, t) == pytest.approx(expected, rel=1e-14)
    assert report(9, ok, f"worst relative FD error {worst:.2e}")


def test_criterion_10_determinism(tmp_path):
    """Re-running every command with the same config and seed is
    byte-identical."""
    commands = {
        "curves": ["curves", "--points", "25"],
        "verify-table": ["verify-table", "--y-points", "5"],
        "oracle": [
            "oracle", "--samples", "20000", "--grid-points", "256",
            "--y", "1.0", "--family", "two_point",
            "--loss", "hdr", "--placement", "both", "--tonemap", "reinhard_gamma",
            "--seed", "5",
        ],
        "train": [
            "train", "--steps", "300", "--pixels", "64",
            "--loss", "hdr", "--placement", "both", "--tonemap", "reinhard_gamma",
            "--seed", "5",
        ],
        "finite-data": ["finite-data", "--trials", "4000", "--seed", "5"],
    }
    ok = True
    for name, argv in commands.items():
        dirs = [tmp_path / f"{name}_{i}" for i in (0, 1)]
        for d in dirs:
            assert cli_main(argv + ["--out", str(d)]) == 0
        files = sorted(p.name for p in dirs[0].iterdir())
        same = files == sorted(p.name for p in dirs[1].iterdir()) and all(
            (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in files
        )
        ok &= same
    assert report(10, ok)
