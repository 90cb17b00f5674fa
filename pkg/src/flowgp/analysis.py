"""Accuracy metrics, single change-point detection, predictability
horizons and the multi-initial-condition benchmark."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, EnsembleError, InputError

LOG_FLOOR = 1e-12


def _states(traj):
    return np.asarray(getattr(traj, "states", traj), dtype=float)


def _residuals(truth, pred, dim):
    a, b = _states(truth), _states(pred)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise InputError(f"trajectory shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] < 2:
        raise InputError("trajectories need at least one predicted step")
    dt_a, dt_b = getattr(truth, "dt", None), getattr(pred, "dt", None)
    if dt_a is not None and dt_b is not None and not math.isclose(dt_a, dt_b):
        raise InputError(f"time steps differ: {dt_a} vs {dt_b}")
    if not 0 <= dim < a.shape[1]:
        raise InputError(f"dimension index {dim} out of range")
    # row 0 is the shared initial condition, not a prediction
    return a[1:, dim] - b[1:, dim]


def mae(truth, pred, dim=0):
    """Mean absolute error over the ``n_step`` predicted points."""
    r = _residuals(truth, pred, dim)
    return float(np.abs(r).sum() / r.size)


def rmse(truth, pred, dim=0):
    """Root mean square error over the ``n_step`` predicted points."""
    r = _residuals(truth, pred, dim)
    return float(math.sqrt((r * r).sum() / r.size))


@dataclass(frozen=True)
class ChangePoint:
    """Single change in mean.

    ``index`` is the 1-based position of the first element of the second
    segment; ``time`` is ``index * dt``.
    """

    index: int
    time: float
    detected: bool
    cost_reduction: float = 0.0
    threshold: float = 0.0


def split_gains(series):
    """Reduction in within-segment sum of squares for every split point.

    Entry ``k - 1`` corresponds to a first segment of ``k`` elements.
    """
    x = np.asarray(series, dtype=float)
    L = x.size
    c = np.cumsum(x - x.mean())[:-1]
    k = np.arange(1, L)
    return c * c * L / (k * (L - k))


def detect_mean_change(series, penalty=2.0, dt=1.0, variance=None):
    """At-most-one change in mean.

    The split maximising the reduction in the two-segment sum of squared
    deviations is reported as detected when that reduction exceeds
    ``penalty * log(L) * variance``. ``variance=None`` uses the sample
    variance of the series, which makes the test scale free; a fixed value
    (e.g. 1) makes it an absolute test on the series' own units.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise InputError("change-point detection needs a 1-d series of length >= 4")
    if not np.all(np.isfinite(x)):
        raise InputError("series contains non-finite values")
    L = x.size
    gains = split_gains(x)
    k = int(np.argmax(gains)) + 1
    gain = float(gains[k - 1])
    var = float(x.var(ddof=1)) if variance is None else float(variance)
    threshold = penalty * math.log(L) * var
    return ChangePoint(k + 1, (k + 1) * dt, gain > threshold, gain, threshold)


def predictability_horizon(sd_series, dt, penalty=3.0, log_transform=False, variance=1.0,
                           floor=LOG_FLOOR):
    """Time of the change point in a prediction-SD series.

    ``sd_series[j]`` is the SD at time ``j * dt``; entry 0 (the shared
    initial condition, SD exactly 0) is left out of the detection. Returns
    the full length ``T = (len - 1) * dt`` when no change is detected.

    The defaults test the raw SD for a mean shift against unit variance
    with a ``3 log(L)`` penalty, so a series whose SD stays small never
    registers a change. ``log_transform=True, variance=None, penalty=2``
    gives the scale-free alternative on ``log10(SD + floor)``.
    """
    sd = np.asarray(sd_series, dtype=float)
    if sd.ndim != 1:
        raise InputError("SD series must be 1-d")
    T = (sd.size - 1) * dt
    s = sd[1:]
    if s.size < 4:
        return T
    if log_transform:
        s = np.log10(s + floor)
    cp = detect_mean_change(s, penalty, dt, variance)
    return cp.time if cp.detected else T


@dataclass
class BenchmarkReport:
    """Per-initial-condition metrics for the ensemble mean and the plug-in baseline."""

    system: str
    initial_conditions: np.ndarray
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def values(self, metric, dim, method):
        return np.array([r[metric] for r in self.records
                         if r["dim"] == dim and r["method"] == method and not r["diverged"]])

    def summary(self):
        """Box-plot statistics per (dim, method) over the non-diverged runs."""
        out = []
        dims = sorted({r["dim"] for r in self.records})
        for dim in dims:
            for method in ("ensemble", "baseline"):
                for metric in ("mae", "rmse"):
                    v = self.values(metric, dim, method)
                    n_div = sum(1 for r in self.records
                                if r["dim"] == dim and r["method"] == method and r["diverged"])
                    row = {"dim": dim, "method": method, "metric": metric, "count": int(v.size),
                           "diverged": n_div}
                    if v.size:
                        q = np.percentile(v, [0, 25, 50, 75, 100])
                    else:
                        q = [math.nan] * 5
                    row.update(zip(("min", "q1", "median", "q3", "max"), map(float, q)))
                    out.append(row)
        return out


def _seed_int(master_seed, *key):
    return int(np.random.SeedSequence(int(master_seed), spawn_key=key).generate_state(1)[0])


def _bench_one(args):
    from .dynamics import simulate_trajectory
    from .emulator import baseline_rollout, ensemble_predict

    em, init_id, x0, T, S, master_seed, horizon_kw = args
    d = em.dim
    records, failures = [], []
    try:
        truth = simulate_trajectory(em.system, x0, T, em.dt, em.substeps, threshold=em.threshold)
    except DivergenceError as err:
        return records, [(init_id, "truth", str(err))]

    def add(method, pred, horizon):
        for i in range(d):
            ok = pred is not None
            records.append({
                "init_id": init_id, "x0": x0, "dim": i + 1, "method": method,
                "mae": mae(truth, pred, i) if ok else math.nan,
                "rmse": rmse(truth, pred, i) if ok else math.nan,
                "horizon": float(horizon[i]) if ok and horizon is not None else math.nan,
                "diverged": not ok,
            })

    try:
        res = ensemble_predict(em, x0, T, S, _seed_int(master_seed, init_id), **horizon_kw)
        add("ensemble", res.mean, res.horizon)
        if res.diverged:
            failures.append((init_id, "ensemble", f"{len(res.diverged)} of {S} realisations diverged"))
    except EnsembleError as err:
        add("ensemble", None, None)
        failures.append((init_id, "ensemble", str(err)))
    try:
        add("baseline", baseline_rollout(em, x0, truth.n_step), None)
    except DivergenceError as err:
        add("baseline", None, None)
        failures.append((init_id, "baseline", str(err)))
    return records, failures


def benchmark(em, n_inits, box, T, seed=0, S=100, master_seed=0, workers=1, **horizon_kw):
    """Compare ensemble mean and plug-in baseline on random initial conditions.

    Initial conditions are i.i.d. uniform in ``box`` and shared by both
    methods. Failures for one initial condition are recorded, not raised.
    """
    if n_inits < 1:
        raise InputError("n_inits must be positive")
    if box.dim != em.dim:
        raise InputError("box dimension does not match the emulator")
    rng = np.random.default_rng(seed)
    inits = rng.uniform(box.lower, box.upper, size=(int(n_inits), em.dim))
    jobs = [(em, i, inits[i], T, S, master_seed, horizon_kw) for i in range(int(n_inits))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(_bench_one, jobs))
    else:
        parts = [_bench_one(j) for j in jobs]
    report = BenchmarkReport(em.system.kind, inits)
    for recs, fails in parts:
        report.records.extend(recs)
        report.failures.extend(fails)
    return report


def _fmt(v):
    return format(float(v), ".17g")


def write_benchmark_csv(report, path):
    d = report.initial_conditions.shape[1]
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["init_id"] + [f"x0_{i + 1}" for i in range(d)]
                   + ["dim", "method", "mae", "rmse", "horizon", "diverged"])
        for r in report.records:
            w.writerow([r["init_id"]] + [_fmt(v) for v in r["x0"]]
                       + [r["dim"], r["method"], _fmt(r["mae"]), _fmt(r["rmse"]), _fmt(r["horizon"]),
                          int(r["diverged"])])
    return path


def write_boxplot_csv(report, path):
    path = Path(path)
    cols = ["dim", "method", "metric", "count", "diverged", "min", "q1", "median", "q3", "max"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in report.summary():
            w.writerow([row[c] if c in ("dim", "method", "metric", "count", "diverged") else _fmt(row[c])
                        for c in cols])
    return path
