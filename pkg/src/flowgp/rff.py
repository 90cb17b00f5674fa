"""Random Fourier features for the SE kernel and sampled realisations of
the approximate GP predictive mean.

A realisation fixes one draw of frequencies and phases; the resulting
predictor ``mu(x) + phi(x)^T Phi (Phi^T Phi)^-1 (y - mu)`` is an ordinary
deterministic function, which is what lets a single draw act as one
coherent approximate flow map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .gp import JITTER_LADDER, KernelParams, TrendModel, jitter_cholesky, _solve


def child_seed(master_seed, *key):
    """Seed for stream ``key`` derived from ``master_seed``.

    Depends only on ``(master_seed, key)``, never on the order in which
    streams are requested.
    """
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))


@dataclass(frozen=True)
class FeatureSample:
    frequencies: np.ndarray  # M x d
    phases: np.ndarray       # M, in [0, 2 pi)

    @property
    def M(self):
        return self.phases.size

    @property
    def dim(self):
        return self.frequencies.shape[1]


def sample_spectral(M, params, seed=None):
    """``M`` i.i.d. frequencies from ``N(0, diag(1 / delta^2))`` and phases from ``U[0, 2 pi)``."""
    if int(M) != M or M < 1:
        raise InputError(f"feature count must be a positive integer, got {M}")
    ls = params.length_scales if isinstance(params, KernelParams) else KernelParams(params).length_scales
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((int(M), ls.size)) / ls
    b = rng.uniform(0.0, 2.0 * np.pi, int(M))
    return FeatureSample(omega, b)


def feature_map(x, fs):
    """``sqrt(2/M) cos(Omega x + b)`` for one point (length M) or rows of ``x`` (m x M)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != fs.dim:
        raise InputError(f"expected dimension {fs.dim}, got {x.shape[-1]}")
    return np.sqrt(2.0 / fs.M) * np.cos(x @ fs.frequencies.T + fs.phases)


def approx_kernel(x, x2, fs):
    return float(feature_map(x, fs) @ feature_map(x2, fs))


def kernel_approx_error(params, M, pairs, seed=None):
    """Largest ``|k(x, x') - phi(x)^T phi(x')|`` over ``pairs`` (shape P x 2 x d) for one sample."""
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 3 or pairs.shape[1] != 2:
        raise InputError("pairs must have shape (P, 2, d)")
    fs = sample_spectral(M, params, seed)
    a, b = pairs[:, 0], pairs[:, 1]
    approx = (feature_map(a, fs) * feature_map(b, fs)).sum(1)
    r = (a - b) / params.length_scales
    exact = np.exp(-0.5 * (r * r).sum(1))
    return float(np.abs(exact - approx).max())


@dataclass(frozen=True)
class RealisationPredictor:
    """One draw of the RFF predictive mean for a single output component.

    ``alpha`` solves ``(Phi^T Phi + nu I) alpha = y - mu``; ``weights`` is
    ``Phi alpha`` so that evaluation costs one feature map and a dot product.
    """

    features: FeatureSample
    alpha: np.ndarray
    weights: np.ndarray
    trend: TrendModel
    X: np.ndarray
    jitter: float

    def __call__(self, x):
        return eval_realisation(self, x)

    def gradient(self, x):
        """Analytic gradient of the predictor at a single point."""
        x = np.asarray(x, dtype=float)
        fs = self.features
        s = -np.sqrt(2.0 / fs.M) * np.sin(fs.frequencies @ x + fs.phases)
        return self.trend.coefficients[1:] + (s * self.weights) @ fs.frequencies

    def to_dict(self):
        return {
            "format": "flowgp.RealisationPredictor/1",
            "frequencies": self.features.frequencies.tolist(),
            "phases": self.features.phases.tolist(),
            "alpha": self.alpha.tolist(),
            "trend": self.trend.coefficients.tolist(),
            "X": self.X.tolist(),
            "jitter": self.jitter,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != "flowgp.RealisationPredictor/1":
            raise InputError(f"not a serialised predictor: {data.get('format')!r}")
        fs = FeatureSample(np.asarray(data["frequencies"], float), np.asarray(data["phases"], float))
        X = np.asarray(data["X"], float)
        alpha = np.asarray(data["alpha"], float)
        return cls(fs, alpha, feature_map(X, fs).T @ alpha, TrendModel(data["trend"]), X,
                   float(data["jitter"]))

    def dumps(self):
        return json.dumps(self.to_dict())


def draw_realisation(model, M, seed=None, ladder=JITTER_LADDER):
    """Draw one RFF realisation of ``model``'s predictive mean.

    The ``n x n`` approximate Gram matrix ``Phi^T Phi`` is factorised with
    the same jitter ladder as the exact GP.
    """
    fs = sample_spectral(M, model.kernel, seed)
    Phi = feature_map(model.X, fs).T  # M x n
    L, nu = jitter_cholesky(Phi.T @ Phi, ladder)
    alpha = _solve(L, model.y - model.trend(model.X))
    return RealisationPredictor(fs, alpha, Phi @ alpha, model.trend, model.X, nu)


def eval_realisation(pred, x):
    """Evaluate a realisation at one point (float) or at the rows of ``x``."""
    x = np.asarray(x, dtype=float)
    out = pred.trend(x) + feature_map(x, pred.features) @ pred.weights
    return float(out) if x.ndim == 1 else out
