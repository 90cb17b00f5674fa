"""Space-filling designs: Latin hypercube sampling with a maximin-style
swap optimiser that increases the mean inter-point distance."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .errors import InputError


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lower_i, upper_i]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise InputError("box bounds must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise InputError("box bounds must be finite")
        if np.any(lower >= upper):
            raise InputError(f"box requires lower < upper, got {lower} / {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, low, high, dim):
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def dim(self):
        return self.lower.size

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    def from_unit(self, u):
        return self.lower + np.asarray(u, dtype=float) * self.width


@dataclass(frozen=True)
class DesignMatrix:
    """``n x d`` matrix of design points inside ``box``.

    ``unit`` holds the same points in ``[0, 1)^d`` coordinates; the
    optimiser works on it so the stratification is never disturbed by
    rounding in the affine map.
    """

    points: np.ndarray
    box: Box
    unit: np.ndarray

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @classmethod
    def from_unit(cls, unit, box):
        unit = np.asarray(unit, dtype=float)
        return cls(points=box.from_unit(unit), box=box, unit=unit)

    def strata(self):
        """Stratum index of each entry, column by column."""
        return np.floor(self.unit * self.n).astype(int)

    def is_latin(self):
        strata = np.sort(self.strata(), axis=0)
        return bool(np.all(strata == np.arange(self.n)[:, None]))


def mean_pairwise_distance(points):
    """Mean Euclidean distance over all unordered pairs (0 for n < 2)."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 2:
        return 0.0
    return float(pdist(points).mean())


def _check_n(n):
    if int(n) != n or n < 1:
        raise InputError(f"design size must be a positive integer, got {n}")
    return int(n)


def lhs_sample(n, box, seed=None):
    """Random Latin hypercube of ``n`` points in ``box``.

    Each column is an independent random permutation of the ``n`` strata
    and every point is placed uniformly at random inside its stratum.
    """
    n = _check_n(n)
    if not isinstance(box, Box):
        raise InputError("box must be a Box")
    rng = np.random.default_rng(seed)
    d = box.dim
    perms = np.column_stack([rng.permutation(n) for _ in range(d)])
    unit = (perms + rng.random((n, d))) / n
    return DesignMatrix.from_unit(unit, box)


def maximin_optimize(design, iterations=1000, seed=None):
    """Improve a Latin hypercube by local moves that keep it Latin.

    Each iteration proposes one of two moves with equal probability: swap
    the entries of two random rows within a random column, or redraw one
    entry uniformly inside its own stratum. A proposal is kept only when
    the mean pairwise distance of the (box-scaled) points strictly
    increases.
    """
    if not isinstance(design, DesignMatrix):
        raise InputError("design must be a DesignMatrix")
    if int(iterations) != iterations or iterations < 0:
        raise InputError("iterations must be a non-negative integer")
    n, d = design.n, design.dim
    if iterations == 0 or n < 2:
        return design

    rng = np.random.default_rng(seed)
    unit = design.unit.copy()
    scale = design.box.width
    pts = unit * scale
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))

    for _ in range(int(iterations)):
        j = rng.integers(d)
        if rng.random() < 0.5:
            a, b = rng.choice(n, size=2, replace=False)
            new_a = pts[a].copy()
            new_b = pts[b].copy()
            new_a[j], new_b[j] = pts[b, j], pts[a, j]
            da = np.sqrt(((pts - new_a) ** 2).sum(-1))
            db = np.sqrt(((pts - new_b) ** 2).sum(-1))
            # rows a and b both move, so their mutual entry is rebuilt
            da[a] = 0.0
            da[b] = np.sqrt(((new_a - new_b) ** 2).sum())
            db[b] = 0.0
            db[a] = da[b]
            old = dist[a].sum() + dist[b].sum() - dist[a, b]
            new = da.sum() + db.sum() - da[b]
            if new > old:
                pts[a], pts[b] = new_a, new_b
                unit[a, j], unit[b, j] = unit[b, j], unit[a, j]
                dist[a, :] = da
                dist[:, a] = da
                dist[b, :] = db
                dist[:, b] = db
        else:
            a = rng.integers(n)
            u = (np.floor(unit[a, j] * n) + rng.random()) / n
            new_a = pts[a].copy()
            new_a[j] = u * scale[j]
            da = np.sqrt(((pts - new_a) ** 2).sum(-1))
            da[a] = 0.0
            if da.sum() > dist[a].sum():
                pts[a] = new_a
                unit[a, j] = u
                dist[a, :] = da
                dist[:, a] = da

    return DesignMatrix.from_unit(unit, design.box)


def maximin_lhs(n, box, iterations=1000, seed=None):
    """LHS followed by swap optimisation, both driven from one seed."""
    ss = np.random.SeedSequence(seed)
    s_lhs, s_opt = ss.spawn(2)
    return maximin_optimize(lhs_sample(n, box, s_lhs), iterations, s_opt)


def write_design_csv(design, path):
    points = design.points if isinstance(design, DesignMatrix) else np.asarray(design)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(points.shape[1])])
        for row in points:
            writer.writerow([format(v, ".17g") for v in row])
    return path


def read_design_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
