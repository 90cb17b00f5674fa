"""Benchmark ODE systems, a fixed-step RK4 integrator and flow-map data.

The three systems are written exactly as the emulation experiments use
them. Note that the Lorenz system is a relabelling of the textbook form:
``x1`` plays the role of the usual ``z`` and ``a2 < 0``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, InputError

DIVERGENCE_THRESHOLD = 1e6

LORENZ_PARAMS = {"a1": -8.0 / 3.0, "a2": -10.0, "a3": 28.0}
VAN_DER_POL_PARAMS = {"a": 5.0}
HINDMARSH_ROSE_PARAMS = {
    "a1": 1.0, "a2": 2.7, "a3": 1.0, "a4": 5.0, "a5": 4.0,
    "eps": 0.01, "I": 2.4, "x_rest": -1.6,
}

_DEFAULTS = {
    "lorenz": (3, LORENZ_PARAMS),
    "vanderpol": (2, VAN_DER_POL_PARAMS),
    "hindmarshrose": (3, HINDMARSH_ROSE_PARAMS),
}

_ALIASES = {
    "lorenz": "lorenz", "lorenz63": "lorenz",
    "vanderpol": "vanderpol", "van_der_pol": "vanderpol", "vdp": "vanderpol",
    "hindmarshrose": "hindmarshrose", "hindmarsh_rose": "hindmarshrose", "hr": "hindmarshrose",
}


@dataclass(frozen=True)
class SystemSpec:
    """One of the built-in systems with a (possibly overridden) parameter set."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower().replace("-", "_"))
        if kind is None:
            raise InputError(f"unknown system {self.kind!r}; expected one of {sorted(_DEFAULTS)}")
        defaults = _DEFAULTS[kind][1]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise InputError(f"unknown parameters for {kind}: {sorted(unknown)}")
        params = {**defaults, **{k: float(v) for k, v in self.params.items()}}
        if kind == "vanderpol" and params["a"] <= 0:
            raise InputError("van der Pol parameter a must be positive")
        if kind == "hindmarshrose" and not 0 < params["eps"] < 1:
            raise InputError("Hindmarsh-Rose eps must lie in (0, 1)")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)

    @property
    def dim(self):
        return _DEFAULTS[self.kind][0]


def lorenz(**params):
    return SystemSpec("lorenz", params)


def van_der_pol(**params):
    return SystemSpec("vanderpol", params)


def hindmarsh_rose(**params):
    return SystemSpec("hindmarshrose", params)


def _as_state(sys, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.dim,):
        raise InputError(f"{sys.kind} expects a state of shape ({sys.dim},), got {x.shape}")
    return x


def _rhs(kind, p, x):
    if kind == "lorenz":
        x1, x2, x3 = x
        return np.array([
            p["a1"] * x1 + x2 * x3,
            p["a2"] * (x2 - x3),
            -x1 * x2 + p["a3"] * x2 - x3,
        ])
    if kind == "vanderpol":
        x1, x2 = x
        return np.array([x2, p["a"] * (1.0 - x1 * x1) * x2 - x1])
    x1, x2, x3 = x
    return np.array([
        x2 - p["a1"] * x1 ** 3 + p["a2"] * x1 ** 2 - x3 + p["I"],
        p["a3"] - p["a4"] * x1 ** 2 - x2,
        p["eps"] * (p["a5"] * (x1 - p["x_rest"]) - x3),
    ])


def vector_field(sys, x):
    """Right-hand side ``v(x)`` of the autonomous system."""
    return _rhs(sys.kind, sys.params, _as_state(sys, x))


def _rk4(kind, p, x, h, substeps, threshold, t0=0.0):
    for k in range(substeps):
        k1 = _rhs(kind, p, x)
        k2 = _rhs(kind, p, x + 0.5 * h * k1)
        k3 = _rhs(kind, p, x + 0.5 * h * k2)
        k4 = _rhs(kind, p, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > threshold:
            t = t0 + (k + 1) * h
            raise DivergenceError(f"state diverged at t={t:g}: {x}", time=t)
    return x


def integrate_step(sys, x, dt, substeps=1, threshold=DIVERGENCE_THRESHOLD):
    """Advance ``x`` by ``dt`` with ``substeps`` classical RK4 steps."""
    x = _as_state(sys, x)
    if not dt > 0:
        raise InputError("dt must be positive")
    if int(substeps) != substeps or substeps < 1:
        raise InputError("substeps must be a positive integer")
    return _rk4(sys.kind, sys.params, x, dt / substeps, int(substeps), threshold)


@dataclass(frozen=True)
class Trajectory:
    """States at ``t0, t0 + dt, ..., t0 + n_step * dt`` (row 0 is the initial condition)."""

    states: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise InputError("dt must be positive")
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        object.__setattr__(self, "states", states)

    @property
    def n_step(self):
        return self.states.shape[0] - 1

    @property
    def dim(self):
        return self.states.shape[1]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.states.shape[0])

    @property
    def T(self):
        return self.n_step * self.dt


def n_steps_for(T, dt):
    n = int(round(T / dt))
    if n < 1 or not dt > 0:
        raise InputError(f"need T >= dt > 0, got T={T}, dt={dt}")
    return n


def simulate_trajectory(sys, x0, T, dt, substeps=1, t0=0.0, threshold=DIVERGENCE_THRESHOLD):
    """Ground-truth trajectory with ``round(T / dt)`` steps of ``integrate_step``."""
    x = _as_state(sys, x0)
    n_step = n_steps_for(T, dt)
    if int(substeps) != substeps or substeps < 1:
        raise InputError("substeps must be a positive integer")
    states = np.empty((n_step + 1, sys.dim))
    states[0] = x
    h = dt / substeps
    for k in range(n_step):
        try:
            x = _rk4(sys.kind, sys.params, x, h, int(substeps), threshold, t0 + k * dt)
        except DivergenceError as err:
            raise DivergenceError(str(err), step=k + 1, time=err.time) from None
        states[k + 1] = x
    return Trajectory(states, dt, t0)


def flow_map_dataset(sys, X, dt, substeps=1, threshold=DIVERGENCE_THRESHOLD):
    """Flow map ``F(x0)`` over one step ``dt`` for every design row."""
    X = np.asarray(getattr(X, "points", X), dtype=float)
    if X.ndim != 2 or X.shape[1] != sys.dim:
        raise InputError(f"design must have {sys.dim} columns, got shape {X.shape}")
    out = np.empty_like(X)
    for i, row in enumerate(X):
        try:
            out[i] = integrate_step(sys, row, dt, substeps, threshold)
        except DivergenceError as err:
            raise DivergenceError(f"design row {i}: {err}", time=err.time, row=i) from None
    return out


def write_trajectory_csv(traj, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(traj.dim)])
        for t, row in zip(traj.times, traj.states):
            writer.writerow([format(t, ".17g")] + [format(v, ".17g") for v in row])
    return path


def read_trajectory_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    t = data[:, 0]
    dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
    return Trajectory(data[:, 1:], dt, float(t[0]))
