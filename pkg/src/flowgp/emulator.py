"""Flow-map emulation of a dynamical simulator.

Training fits one exact GP per state component on a maximin Latin
hypercube of initial conditions. Prediction draws ``S`` realisations of
the RFF-approximated flow map and iterates each of them from ``x0``; the
per-time mean and SD across the realisations are the prediction and its
uncertainty.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import predictability_horizon
from .design import Box, DesignMatrix, maximin_lhs
from .dynamics import (DIVERGENCE_THRESHOLD, SystemSpec, Trajectory, flow_map_dataset, n_steps_for,
                       write_trajectory_csv)
from .errors import DivergenceError, EnsembleError, FittingError, InputError
from .gp import GpModel, SearchConfig, fit_hyperparameters, predict_mean_exact
from .rff import child_seed, draw_realisation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowMapEmulator:
    system: SystemSpec
    dt: float
    models: tuple
    design: DesignMatrix
    M: int = 250
    substeps: int = 1
    threshold: float = DIVERGENCE_THRESHOLD

    @property
    def dim(self):
        return len(self.models)

    @property
    def box(self):
        return self.design.box

    def to_dict(self):
        return {
            "format": "flowgp.FlowMapEmulator/1",
            "system": self.system.kind,
            "params": self.system.params,
            "dt": self.dt,
            "M": self.M,
            "substeps": self.substeps,
            "threshold": self.threshold,
            "box_lower": self.box.lower.tolist(),
            "box_upper": self.box.upper.tolist(),
            "design_unit": self.design.unit.tolist(),
            "models": [m.to_dict() for m in self.models],
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != "flowgp.FlowMapEmulator/1":
            raise InputError(f"not a serialised emulator: {data.get('format')!r}")
        box = Box(data["box_lower"], data["box_upper"])
        design = DesignMatrix.from_unit(np.asarray(data["design_unit"], float), box)
        models = tuple(GpModel.from_dict(m) for m in data["models"])
        return cls(SystemSpec(data["system"], data["params"]), float(data["dt"]), models, design,
                   int(data["M"]), int(data["substeps"]), float(data["threshold"]))

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def _train_seeds(seed):
    ss = np.random.SeedSequence(int(seed))
    return tuple(int(s.generate_state(1)[0]) for s in ss.spawn(2))


def training_design(n, box, seed=0, lhs_iterations=1000):
    """The maximin LHS that :func:`train` uses for a given ``seed``."""
    return maximin_lhs(n, box, lhs_iterations, seed=_train_seeds(seed)[0])


def train(sys, n, box, dt, seed=0, M=250, search=None, lhs_iterations=1000, substeps=1,
          threshold=DIVERGENCE_THRESHOLD):
    """Design, simulate one step from every design point and fit one GP per component.

    The default search keeps the fits jitter-free whenever possible so each
    component model interpolates the simulator output.
    """
    d = sys.dim
    if box.dim != d:
        raise InputError(f"box has dimension {box.dim}, system has {d}")
    if n < d + 2:
        raise InputError(f"need n >= d + 2 = {d + 2} training points, got {n}")
    design_seed, search_seed = _train_seeds(seed)
    design = maximin_lhs(n, box, lhs_iterations, seed=design_seed)
    Y = flow_map_dataset(sys, design, dt, substeps, threshold)
    search = search or SearchConfig(seed=search_seed, exact_first=True)
    models = []
    for i in range(d):
        try:
            models.append(fit_hyperparameters(design.points, Y[:, i], search))
        except FittingError as err:
            raise FittingError(f"component x{i + 1}: {err}") from None
    return FlowMapEmulator(sys, float(dt), tuple(models), design, int(M), int(substeps), threshold)


def draw_flow_map(em, s, master_seed):
    """The ``d`` component predictors of realisation ``s`` (one feature draw each)."""
    return [draw_realisation(m, em.M, child_seed(master_seed, i, s)) for i, m in enumerate(em.models)]


def _iterate(step, x0, n_step, dt, threshold, box=None):
    states = np.empty((n_step + 1, x0.size))
    states[0] = x = x0
    warned = False
    for k in range(n_step):
        x = step(x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > threshold:
            raise DivergenceError(f"rollout diverged at step {k + 1}", step=k + 1, time=(k + 1) * dt)
        if box is not None and not warned and not box.contains(x):
            log.warning("rollout left the training box at step %d: %s", k + 1, x)
            warned = True
        states[k + 1] = x
    return Trajectory(states, dt)


def _x0(em, x0):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (em.dim,):
        raise InputError(f"initial condition must have shape ({em.dim},)")
    return x0


def rollout_realisation(em, x0, n_step, s, master_seed, warn_outside_box=False):
    """Iterate realisation ``s`` from ``x0``; the same predictors serve every step."""
    preds = draw_flow_map(em, s, master_seed)
    return _iterate(lambda x: np.array([p(x) for p in preds]), _x0(em, x0), int(n_step), em.dt,
                    em.threshold, em.box if warn_outside_box else None)


def baseline_rollout(em, x0, n_step):
    """Plug-in rollout of the exact GP predictive mean (no uncertainty)."""
    return _iterate(lambda x: np.array([predict_mean_exact(m, x) for m in em.models]),
                    _x0(em, x0), int(n_step), em.dt, em.threshold)


@dataclass(frozen=True)
class EnsembleResult:
    """Rolled-out realisations and their per-time summaries.

    ``trajectories`` holds only the realisations that stayed finite, in
    realisation-index order; ``realisations`` gives their indices and
    ``diverged`` the indices that were dropped.
    """

    trajectories: np.ndarray  # S_ok x (n_step + 1) x d
    mean: np.ndarray
    sd: np.ndarray
    horizon: np.ndarray
    dt: float
    realisations: tuple
    diverged: tuple = ()
    failures: tuple = field(default=(), repr=False)

    @property
    def times(self):
        return self.dt * np.arange(self.mean.shape[0])

    @property
    def n_step(self):
        return self.mean.shape[0] - 1

    @property
    def divergence_fraction(self):
        total = len(self.realisations) + len(self.diverged)
        return len(self.diverged) / total if total else 0.0

    def mean_trajectory(self):
        return Trajectory(self.mean, self.dt)


def _rollout_chunk(args):
    em, x0, n_step, indices, master_seed = args
    out = []
    for s in indices:
        try:
            out.append((s, rollout_realisation(em, x0, n_step, s, master_seed).states, None))
        except DivergenceError as err:
            out.append((s, None, (err.step, str(err))))
    return out


def summarize(trajectories, dt, realisations=None, diverged=(), failures=(), **horizon_kw):
    """Mean, sample SD (ddof=1) and per-component predictability horizon."""
    trajectories = np.asarray(trajectories, dtype=float)
    mean = trajectories.mean(axis=0)
    if trajectories.shape[0] > 1:
        sd = trajectories.std(axis=0, ddof=1)
    else:
        sd = np.zeros_like(mean)
    horizon = np.array([predictability_horizon(sd[:, i], dt, **horizon_kw) for i in range(mean.shape[1])])
    if realisations is None:
        realisations = tuple(range(trajectories.shape[0]))
    return EnsembleResult(trajectories, mean, sd, horizon, dt, tuple(realisations), tuple(diverged),
                          tuple(failures))


def ensemble_predict(em, x0, T, S=100, master_seed=0, workers=1, **horizon_kw):
    """Roll out ``S`` realisations and summarise them.

    ``workers > 1`` spreads realisations over processes; realisation ``s``
    always uses the child seeds ``(master_seed, i, s)`` so the result does
    not depend on the schedule. Diverged rollouts are dropped with a
    warning and reported in ``EnsembleResult.diverged``.
    """
    x0 = _x0(em, x0)
    if S < 2:
        raise InputError("an ensemble needs S >= 2 realisations")
    n_step = n_steps_for(T, em.dt)
    indices = list(range(int(S)))
    workers = max(1, min(int(workers), len(indices)))
    chunks = [indices[w::workers] for w in range(workers)]
    jobs = [(em, x0, n_step, c, master_seed) for c in chunks]
    if workers == 1:
        parts = [_rollout_chunk(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_rollout_chunk, jobs))
    results = sorted((r for p in parts for r in p), key=lambda r: r[0])

    ok = [(s, states) for s, states, _ in results if states is not None]
    failed = [(s, f) for s, _, f in results if f is not None]
    if failed:
        log.warning("%d of %d realisations diverged and were excluded", len(failed), S)
    if not ok:
        raise EnsembleError(f"all {S} realisations diverged", n_diverged=len(failed), failures=failed)
    return summarize(np.stack([st for _, st in ok]), em.dt, [s for s, _ in ok],
                     [s for s, _ in failed], [f for _, f in failed], **horizon_kw)


def write_summary_csv(result, path):
    """``t,mean_x1,sd_x1,...,mean_xd,sd_xd`` at 17 significant digits."""
    d = result.mean.shape[1]
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [c for i in range(d) for c in (f"mean_x{i + 1}", f"sd_x{i + 1}")])
        for t, m, s in zip(result.times, result.mean, result.sd):
            w.writerow([format(t, ".17g")] + [format(v, ".17g") for pair in zip(m, s) for v in pair])
    return path


def read_summary_csv(path):
    """Return ``(times, mean, sd)`` arrays from a summary CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1::2], data[:, 2::2]


def write_realisation_csvs(result, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for s, states in zip(result.realisations, result.trajectories):
        paths.append(write_trajectory_csv(Trajectory(states, result.dt), directory / f"realisation_{s:04d}.csv"))
    return paths
