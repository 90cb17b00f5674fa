"""Acceptance gate. Each test prints one PASS/FAIL line with the measured
value and the threshold it is held to, then asserts it."""

import math
import time

import numpy as np
import pytest

from test_analysis import brute_force_split
from test_gp import gp_sample
from flowgp.analysis import detect_mean_change, mae
from flowgp.dynamics import lorenz, simulate_trajectory
from flowgp.emulator import ensemble_predict, write_summary_csv
from flowgp.gp import GpModel, KernelParams, TrendModel, fit_hyperparameters, predict_mean_exact
from flowgp.rff import child_seed, draw_realisation, kernel_approx_error

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def _report(label, passed, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] {label}: {detail}")
        return passed
    return _report


def test_c01_rff_kernel_error_rate(lorenz_em, report):
    start = time.perf_counter()
    pairs = np.random.default_rng(0).uniform(-10, 10, (500, 2, 3))
    ratios = []
    for m in lorenz_em.models:
        med = {M: np.median([kernel_approx_error(m.kernel, M, pairs, seed=s) for s in range(50)])
               for M in (250, 4000)}
        ratios.append(med[250] / med[4000])
    elapsed = time.perf_counter() - start
    ok = all(2.5 <= r <= 6.0 for r in ratios) and elapsed < 60
    assert report("C1 RFF error ratio M=250/M=4000 in [2.5, 6], < 60 s", ok,
                  f"ratios {np.round(ratios, 3).tolist()}, {elapsed:.1f} s")


def test_c02_exact_interpolation(lorenz_em, vdp_em, hr_em, report):
    worst, jitter = 0.0, 0.0
    for em in (lorenz_em, vdp_em, hr_em):
        for m in em.models:
            worst = max(worst, float(np.abs(predict_mean_exact(m, m.X) - m.y).max()))
            jitter = max(jitter, m.jitter)
    ok = worst <= 1e-6 and jitter <= 1e-8
    assert report("C2 interpolation error <= 1e-6 with jitter <= 1e-8", ok,
                  f"max error {worst:.2e}, max jitter {jitter:g}")


def _consistency(model, pts, R=200, M=2000, key=0):
    draws = np.stack([draw_realisation(model, M, seed=child_seed(key, 0, s))(pts) for s in range(R)])
    se = draws.std(axis=0, ddof=1) / math.sqrt(R)
    return float(np.mean(np.abs(draws.mean(axis=0) - predict_mean_exact(model, pts)) <= 2 * se))


def test_c03_realisation_consistency(lorenz_em, report):
    start = time.perf_counter()
    pts = lorenz_em.box.from_unit(np.random.default_rng(7).random((50, 3)))
    fracs = [_consistency(m, pts, key=i) for i, m in enumerate(lorenz_em.models)]

    # same statistic on a well-conditioned model, as a check of the estimator itself
    X = np.linspace(0, 20, 11)[:, None]
    ref = GpModel.build(X, np.sin(0.6 * X[:, 0]), KernelParams([1.0]), TrendModel([0.0, 0.0]))
    ref_frac = _consistency(ref, np.random.default_rng(8).uniform(0, 20, (50, 1)), key=99)
    elapsed = time.perf_counter() - start

    ok = min(fracs) >= 0.9 and elapsed < 120
    assert report("C3 realisation mean within 2 SE of exact mean for >= 90% of points (Lorenz, M=2000)", ok,
                  f"fractions {np.round(fracs, 2).tolist()}; well-conditioned reference {ref_frac:.2f}; "
                  f"{elapsed:.1f} s")


@pytest.fixture(scope="module")
def lorenz_run(lorenz_em):
    start = time.perf_counter()
    res = ensemble_predict(lorenz_em, [1.0, 1.0, 1.0], 20.0, S=100, master_seed=0)
    truth = simulate_trajectory(lorenz_em.system, [1.0, 1.0, 1.0], 20.0, 0.01)
    return res, truth, time.perf_counter() - start


def test_c04a_lorenz_early_tracking(lorenz_run, report):
    res, truth, _ = lorenz_run
    k = int(round(5.0 / res.dt)) + 1
    err = np.abs(res.mean[:k] - truth.states[:k]).max(axis=0)
    sd = truth.states.std(axis=0, ddof=1)
    ok = bool(np.all(err < sd))
    assert report("C4a Lorenz max |mean - truth| on [0, 5] < trajectory SD per component", ok,
                  f"errors {np.round(err, 3).tolist()} vs SD {np.round(sd, 2).tolist()}")


def test_c04b_lorenz_horizon(lorenz_run, report):
    res, _, elapsed = lorenz_run
    found = int(np.sum(res.horizon < 20.0 - 1e-9))
    ok = found >= 2 and elapsed < 600
    assert report("C4b Lorenz horizon detected before T=20 in >= 2 of 3 components", ok,
                  f"horizons {np.round(res.horizon, 2).tolist()}, {elapsed:.1f} s")


def test_c04c_lorenz_band_coverage(lorenz_run, report):
    res, truth, _ = lorenz_run
    t = res.times
    inside, total, per_dim = 0, 0, []
    for i, h in enumerate(res.horizon):
        after = t > h
        hit = np.abs(truth.states[after, i] - res.mean[after, i]) <= res.sd[after, i]
        inside += int(hit.sum())
        total += hit.size
        per_dim.append(float(hit.mean()) if hit.size else math.nan)
    cover = inside / total if total else math.nan
    ok = total > 0 and cover >= 0.8
    assert report("C4c Lorenz +-1 SD band covers >= 80% of truth after the horizon", ok,
                  f"pooled {cover:.3f}, per component {np.round(per_dim, 3).tolist()}")


def test_c05_van_der_pol(vdp_em, report):
    start = time.perf_counter()
    truth = simulate_trajectory(vdp_em.system, [1.0, 1.0], 20.0, 0.01)
    k = int(round(10.0 / 0.01)) + 1
    horizons, maes = [], []
    for seed in range(5):
        res = ensemble_predict(vdp_em, [1.0, 1.0], 20.0, S=100, master_seed=seed)
        horizons.append(float(res.horizon[0]))
        maes.append(mae(truth.states[:k], res.mean[:k], 0))
    elapsed = time.perf_counter() - start
    full = sum(math.isclose(h, 20.0) for h in horizons)
    best3 = sorted(maes)[:3]
    ok = full >= 1 and max(best3) < 0.5 and elapsed < 600
    assert report("C5 vdP x1 horizon = 20 for >= 1 of 5 seeds and best-3 MAE(x1, [0,10]) < 0.5", ok,
                  f"horizons {horizons}, MAE {[f'{v:.2e}' for v in maes]}, {elapsed:.1f} s")


def test_c06_hindmarsh_rose(hr_em, report):
    start = time.perf_counter()
    truth = simulate_trajectory(hr_em.system, [1.0, 1.0, 1.0], 100.0, 0.01)
    maes = []
    for seed in range(5):
        res = ensemble_predict(hr_em, [1.0, 1.0, 1.0], 100.0, S=100, master_seed=seed)
        maes.append(mae(truth, res.mean, 2))
    elapsed = time.perf_counter() - start
    ok = sum(v < 0.1 for v in maes) >= 3 and elapsed < 900
    assert report("C6 HR MAE(x3) over [0, 100] < 0.1 for >= 3 of 5 seeds", ok,
                  f"MAE {[f'{v:.2e}' for v in maes]}, {elapsed:.1f} s")


def test_c07_change_point_oracle(report):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1000):
        L = int(rng.integers(4, 201))
        x = rng.normal(size=L) * rng.uniform(0.1, 5)
        if rng.random() < 0.7:
            x[rng.integers(1, L):] += rng.normal(0, 3)
        k, _ = brute_force_split(x)
        mismatches += detect_mean_change(x).index != k
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 60
    assert report("C7 change point equals exhaustive search on 1000 series", ok,
                  f"{mismatches} mismatches, {elapsed:.1f} s")


def test_c08_mle_recovery(report):
    start = time.perf_counter()
    hits, fits = 0, []
    for seed in range(10):
        X = np.sort(np.random.default_rng(seed).uniform(0, 10, 80))[:, None]
        y = gp_sample(X, 0.5, 1.0, seed=1000 + seed)
        m = fit_hyperparameters(X, y)
        d, s2 = float(m.kernel.length_scales[0]), m.kernel.signal_variance
        fits.append((round(d, 3), round(s2, 3)))
        hits += 0.25 <= d <= 1.0 and 0.5 <= s2 <= 2.0
    elapsed = time.perf_counter() - start
    ok = hits >= 8 and elapsed < 120
    assert report("C8 MLE recovers delta in [0.25, 1] and sigma2 in [0.5, 2] for >= 8 of 10 seeds", ok,
                  f"{hits}/10 {fits}, {elapsed:.1f} s")


def test_c09_parallel_equivalence(lorenz_em, tmp_path, report):
    start = time.perf_counter()
    paths = []
    for w in (1, 8):
        res = ensemble_predict(lorenz_em, [1.0, 1.0, 1.0], 20.0, S=100, master_seed=5, workers=w)
        paths.append(write_summary_csv(res, tmp_path / f"w{w}.csv"))
    elapsed = time.perf_counter() - start
    same = paths[0].read_bytes() == paths[1].read_bytes()
    ok = same and elapsed < 300
    assert report("C9 summary CSV identical for 1 and 8 workers", ok, f"identical={same}, {elapsed:.1f} s")


def test_c10_rk4_order(report):
    sys = lorenz()
    x0 = [1.0, 1.0, 1.0]
    ref = simulate_trajectory(sys, x0, 1.0, 0.01, substeps=64).states
    errs = []
    for sub in (1, 2, 4):
        errs.append(np.abs(simulate_trajectory(sys, x0, 1.0, 0.01, substeps=sub).states - ref).max())
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    ok = all(3.5 <= p <= 4.5 for p in orders)
    assert report("C10 RK4 observed order on Lorenz [0, 1] in [3.5, 4.5]", ok,
                  f"orders {np.round(orders, 3).tolist()}")
