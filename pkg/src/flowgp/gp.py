"""Exact GP regression for one scalar flow-map component.

Squared-exponential correlation with per-dimension length-scales, a
first-order trend ``beta_1 + beta_2^T x`` and maximum likelihood estimation
of the length-scales through the profile log-likelihood (the trend
coefficients and signal variance have closed forms given the length-scales).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize

from .design import Box, lhs_sample
from .errors import ConditioningError, DegeneracyError, FittingError, InputError

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class KernelParams:
    length_scales: np.ndarray
    signal_variance: float = 1.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        if ls.ndim != 1 or not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise InputError(f"length-scales must be positive and finite, got {ls}")
        s2 = float(self.signal_variance)
        if not (math.isfinite(s2) and s2 > 0):
            raise InputError(f"signal variance must be positive and finite, got {s2}")
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "signal_variance", s2)

    @property
    def dim(self):
        return self.length_scales.size


@dataclass(frozen=True)
class TrendModel:
    """Linear trend ``mu(x) = coefficients[0] + coefficients[1:] @ x``."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if c.ndim != 1 or c.size < 2:
            raise InputError("trend needs d + 1 coefficients")
        object.__setattr__(self, "coefficients", c)

    @property
    def dim(self):
        return self.coefficients.size - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.coefficients[0] + x @ self.coefficients[1:]


def regression_matrix(X):
    """Experimental matrix ``Q = [1, X]`` of the first-order trend."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.column_stack([np.ones(X.shape[0]), X])


def _scaled(X, length_scales):
    return np.atleast_2d(np.asarray(X, dtype=float)) / length_scales


def se_kernel(x, x2, params):
    """Squared-exponential correlation between two single points."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    ls = params.length_scales if isinstance(params, KernelParams) else KernelParams(params).length_scales
    if x.shape != x2.shape or x.shape != ls.shape:
        raise InputError("kernel arguments and length-scales must share one dimension")
    r = (x - x2) / ls
    return float(np.exp(-0.5 * r @ r))


def gram(X1, X2, length_scales):
    """Correlation matrix ``k(X1[i], X2[j])``."""
    A = _scaled(X1, length_scales)
    B = _scaled(X2, length_scales)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-0.5 * np.maximum(sq, 0.0))


def gram_symmetric(X, length_scales):
    """Gram matrix of one point set, exactly symmetric with unit diagonal."""
    A = _scaled(X, length_scales)
    diff = A[:, None, :] - A[None, :, :]
    return np.exp(-0.5 * (diff * diff).sum(-1))


def condition_number(K):
    """2-norm condition number of a symmetric matrix (inf if not positive definite)."""
    ev = np.linalg.eigvalsh(K)
    return math.inf if ev[0] <= 0 else float(ev[-1] / ev[0])


def jitter_cholesky(K, ladder=JITTER_LADDER, max_condition=None):
    """Lower Cholesky factor of ``K + nu I`` for the smallest ``nu`` that works.

    With ``max_condition`` a rung is also skipped when ``K + nu I`` is
    worse conditioned than that.
    """
    n = K.shape[0]
    for nu in ladder:
        Kj = K + nu * np.eye(n)
        if max_condition is not None and condition_number(Kj) > max_condition:
            continue
        try:
            L = la.cholesky(Kj, lower=True, check_finite=False)
        except la.LinAlgError:
            continue
        if np.all(np.isfinite(L)) and np.all(np.diag(L) > 0):
            return L, nu
    raise ConditioningError(f"matrix not positive definite with jitter up to {ladder[-1]:g}"
                            + ("" if max_condition is None else f" and condition <= {max_condition:g}"))


def _solve(L, b):
    return la.cho_solve((L, True), b, check_finite=False)


def _logdet(L):
    return 2.0 * float(np.log(np.diag(L)).sum())


@dataclass(frozen=True)
class _Factor:
    L: np.ndarray
    jitter: float

    def whiten(self, b):
        return la.solve_triangular(self.L, b, lower=True, check_finite=False)

    @property
    def logdet(self):
        return _logdet(self.L)


def _factor(X, length_scales, ladder=JITTER_LADDER, max_condition=None):
    L, nu = jitter_cholesky(gram_symmetric(X, length_scales), ladder, max_condition)
    return _Factor(L, nu)


def _check_data(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise InputError(f"{X.shape[0]} inputs but {y.size} outputs")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("training data must be finite")
    return X, y


def _length_scales(params):
    if isinstance(params, KernelParams):
        return params.length_scales
    return KernelParams(params).length_scales


def log_likelihood(X, y, params, trend, ladder=JITTER_LADDER):
    """Gaussian log-likelihood of ``y`` under trend ``trend`` and kernel ``params``."""
    X, y = _check_data(X, y)
    n = y.size
    f = _factor(X, params.length_scales, ladder)
    r = f.whiten(y - trend(X))
    s2 = params.signal_variance
    return -0.5 * n * math.log(2 * math.pi * s2) - 0.5 * f.logdet - 0.5 * float(r @ r) / s2


def _gls(f, X, y, basis=regression_matrix):
    Q = basis(X)
    if np.linalg.matrix_rank(Q) < Q.shape[1]:
        raise DegeneracyError("trend regression matrix is rank deficient")
    A = f.whiten(Q)
    b = f.whiten(y)
    beta, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = b - A @ beta
    return beta, float(resid @ resid) / y.size


def beta_hat(X, y, params, ladder=JITTER_LADDER):
    """Generalised least-squares trend ``(Q^T K^-1 Q)^-1 Q^T K^-1 y``."""
    X, y = _check_data(X, y)
    beta, _ = _gls(_factor(X, _length_scales(params), ladder), X, y)
    return TrendModel(beta)


def sigma2_hat(X, y, params, trend=None, ladder=JITTER_LADDER):
    """ML signal variance ``(y - mu)^T K^-1 (y - mu) / n``.

    ``trend`` defaults to the GLS estimate.
    """
    X, y = _check_data(X, y)
    f = _factor(X, _length_scales(params), ladder)
    if trend is None:
        return _gls(f, X, y)[1]
    r = f.whiten(y - trend(X))
    return float(r @ r) / y.size


def profile_log_likelihood(X, y, delta, ladder=JITTER_LADDER, basis=regression_matrix):
    """``-n/2 ln(sigma2_hat) - 1/2 ln|K|`` with the closed-form estimates plugged in.

    ``basis`` maps inputs to the trend's regression matrix; everything else
    in the package uses the first-order trend.
    """
    X, y = _check_data(X, y)
    f = _factor(X, _length_scales(delta), ladder)
    _, s2 = _gls(f, X, y, basis)
    return -0.5 * y.size * math.log(s2) - 0.5 * f.logdet if s2 > 0 else math.inf


@dataclass(frozen=True)
class SearchConfig:
    """Multi-start search over log length-scales.

    Start points are a Latin hypercube over ``[ln(lower * range_i),
    ln(upper * range_i)]`` where ``range_i`` is the spread of column ``i``
    of the design. Length-scales whose Gram matrix has a 2-norm condition
    number above ``max_condition`` (or that need more jitter than ``ladder``
    offers) are rejected: for noise-free data the likelihood keeps rising
    towards the flat-kernel limit, where the factorisation loses all
    accuracy and the interpolation property breaks down.

    With ``exact_first`` the search initially admits only unjittered
    factorisations and climbs the ladder one rung at a time only when every
    start fails. Use it for deterministic simulator output, where the fit
    must interpolate; otherwise the best likelihood over the whole ladder
    wins.
    """

    n_starts: int = 10
    lower: float = 0.01
    upper: float = 100.0
    seed: int = 0
    maxiter: int = 400
    ladder: tuple = (0.0, 1e-10, 1e-8)
    max_condition: float = 1e13
    exact_first: bool = False


@dataclass(frozen=True)
class GpModel:
    """Fitted GP for one flow-map component. Immutable after construction."""

    X: np.ndarray
    y: np.ndarray
    kernel: KernelParams
    trend: TrendModel
    jitter: float
    objective: float = float("nan")
    start_index: int = -1
    L: np.ndarray = field(default=None, repr=False)
    alpha: np.ndarray = field(default=None, repr=False)

    @classmethod
    def build(cls, X, y, kernel, trend, ladder=JITTER_LADDER, objective=float("nan"), start_index=-1,
              jitter=None):
        """Factorise the Gram matrix and precompute ``(K + nu I)^-1 (y - mu)``.

        Passing ``jitter`` pins the factorisation to that exact value.
        """
        X, y = _check_data(X, y)
        if jitter is not None:
            ladder = (float(jitter),)
        f = _factor(X, kernel.length_scales, ladder)
        alpha = _solve(f.L, y - trend(X))
        return cls(X, y, kernel, trend, f.jitter, float(objective), int(start_index), f.L, alpha)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def to_dict(self):
        return {
            "format": "flowgp.GpModel/1",
            "length_scales": self.kernel.length_scales.tolist(),
            "signal_variance": self.kernel.signal_variance,
            "trend": self.trend.coefficients.tolist(),
            "jitter": self.jitter,
            "objective": self.objective,
            "start_index": self.start_index,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != "flowgp.GpModel/1":
            raise InputError(f"not a serialised GpModel: {data.get('format')!r}")
        return cls.build(
            data["X"], data["y"],
            KernelParams(data["length_scales"], data["signal_variance"]),
            TrendModel(data["trend"]),
            objective=data["objective"], start_index=data["start_index"], jitter=data["jitter"],
        )

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def predict_mean_exact(model, x):
    """Exact predictive mean ``mu(x) + k(x, X)^T (K + nu I)^-1 (y - mu(X))``.

    ``x`` may be one point (returns a float) or an ``m x d`` array.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    if xs.shape[1] != model.dim:
        raise InputError(f"expected points of dimension {model.dim}, got {xs.shape[1]}")
    out = model.trend(xs) + gram(xs, model.X, model.kernel.length_scales) @ model.alpha
    return float(out[0]) if single else out


def _objective(X, y, config, ladder=None):
    ladder = config.ladder if ladder is None else ladder

    def neg(log_delta):
        try:
            f = _factor(X, np.exp(log_delta), ladder, config.max_condition)
            _, s2 = _gls(f, X, y)
        except (ConditioningError, FloatingPointError):
            return 1e300
        if not s2 > 0:
            return 1e300
        return 0.5 * y.size * math.log(s2) + 0.5 * f.logdet
    return neg


def search_starts(X, config):
    """Start points (log length-scales) and bounds of the multi-start search."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    spread = X.max(0) - X.min(0)
    spread = np.where(spread > 0, spread, 1.0)
    lo = np.log(config.lower * spread)
    hi = np.log(config.upper * spread)
    return lhs_sample(config.n_starts, Box(lo, hi), seed=config.seed).points, (lo, hi)


def _multistart(X, y, config, ladder):
    starts, (lo, hi) = search_starts(X, config)
    neg = _objective(X, y, config, ladder)
    d = X.shape[1]
    best = None
    failures = []
    for i, s in enumerate(starts):
        f0 = neg(s)
        try:
            res = minimize(neg, s, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                           options={"maxiter": config.maxiter * d, "xatol": 1e-4, "fatol": 1e-8})
        except (ValueError, np.linalg.LinAlgError) as err:
            failures.append((i, repr(err)))
            continue
        x_best, f_best = (res.x, res.fun) if res.fun <= f0 else (s, f0)
        if f_best >= 1e300:
            failures.append((i, "objective not finite at start or optimum"))
            continue
        if best is None or f_best < best[1]:
            best = (x_best, f_best, i)
    return best, failures


def fit_hyperparameters(X, y, config=None):
    """Maximum likelihood fit of one component.

    Runs a bounded Nelder-Mead search on the negative profile log-likelihood
    from each start, keeps the best (lowest start index on ties), then sets
    the trend and signal variance by their closed forms.
    """
    config = config or SearchConfig()
    X, y = _check_data(X, y)
    n, d = X.shape
    if n < d + 2:
        raise InputError(f"need at least d + 2 = {d + 2} training points, got {n}")

    rungs = range(1, len(config.ladder) + 1) if config.exact_first else [len(config.ladder)]
    for r in rungs:
        ladder = config.ladder[:r]
        best, failures = _multistart(X, y, config, ladder)
        if best is not None:
            break
    else:
        raise FittingError(f"all {config.n_starts} starts failed: {failures}")

    delta = np.exp(best[0])
    f = _factor(X, delta, ladder, config.max_condition)
    beta, s2 = _gls(f, X, y)
    kernel = KernelParams(delta, s2)
    return GpModel.build(X, y, kernel, TrendModel(beta), objective=-best[1], start_index=best[2],
                         jitter=f.jitter)
