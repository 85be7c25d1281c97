"""Gaussian-process conditioning and prediction for one hyperparameter sample.

A PosteriorSample is an immutable fitted GP: Cholesky factor of the Gram
matrix plus the weight vector for the standardized observations. The prior
mean is zero; observations are centered by their sample mean and divided by
their sample standard deviation before fitting, and both are restored on
prediction. Standardization keeps the signal variance posterior near its
prior scale even when the raw outcomes are nearly constant, which would
otherwise let the noise floor dominate the model.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from . import kernels
from .exceptions import NumericFailure
from .kernels import (ArdParams, HammingParams, SpartanParams, WeightConfig,
                      ard_cross_from_sq, hamming_cross, spartan_cross,
                      sq_diff_tensor)

log = logging.getLogger(__name__)

DEFAULT_NOISE = 1e-6
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class Dataset:
    """Observed inputs and outcomes. Continuous coordinates live in the unit
    hypercube; an optional categorical block holds integer codes per point."""

    X: np.ndarray
    y: np.ndarray
    C: Optional[np.ndarray] = None
    _sq: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y lengths differ")
        if self.C is not None:
            self.C = np.atleast_2d(np.asarray(self.C, dtype=int))
            if self.C.shape[0] != self.y.shape[0]:
                raise ValueError("categorical block length differs from y")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def sq_diffs(self) -> np.ndarray:
        """Cached (n, n, d) squared-difference tensor; shared by every
        hyperparameter evaluation against this dataset."""
        if self._sq is None:
            self._sq = sq_diff_tensor(self.X, self.X)
        return self._sq

    def append(self, x, y: float, c=None) -> "Dataset":
        """New dataset with one more observation (the original is unchanged)."""
        X = np.vstack([self.X, np.atleast_2d(np.asarray(x, dtype=float))])
        yy = np.append(self.y, y)
        C = self.C
        if c is not None or C is not None:
            if c is None or C is None:
                raise ValueError("categorical block must be present for all points or none")
            C = np.vstack([C, np.atleast_2d(np.asarray(c, dtype=int))])
        return Dataset(X, yy, C)

    @classmethod
    def empty(cls, dim: int, n_cat: int = 0) -> "Dataset":
        C = np.empty((0, n_cat), dtype=int) if n_cat else None
        return cls(np.empty((0, dim)), np.empty(0), C)


@dataclass(frozen=True)
class Prediction:
    mu: float
    sigma2: float


class PosteriorSample:
    """A GP conditioned on a Dataset under one hyperparameter sample."""

    def __init__(self, params, kernel: str, data: Dataset, chol, alpha,
                 y_mean: float, noise_variance: float,
                 weight_config: WeightConfig, y_scale: float = 1.0):
        self.params = params
        self.kernel = kernel
        self.data = data
        self.chol = chol          # lower-triangular factor, or None when n = 0
        self.alpha = alpha
        self.y_mean = y_mean
        self.y_scale = y_scale
        self.noise_variance = noise_variance
        self.weight_config = weight_config

    def log_marginal_likelihood(self) -> float:
        n = self.data.n
        if n == 0:
            return 0.0
        yc = (self.data.y - self.y_mean) / self.y_scale
        return float(-0.5 * yc @ self.alpha
                     - np.sum(np.log(np.diag(self.chol)))
                     - 0.5 * n * _LOG_2PI)


def _cross_builder(params, kernel: str, w: WeightConfig):
    """Cross-covariance callable over stacked continuous points (or
    categorical codes for the Hamming model)."""
    if kernel in ("matern52", "se"):
        if not isinstance(params, ArdParams):
            raise ValueError(f"kernel {kernel!r} needs ArdParams")
        return lambda A, B: ard_cross_from_sq(sq_diff_tensor(A, B), params, base=kernel)
    if kernel == "spartan":
        if not isinstance(params, SpartanParams):
            raise ValueError("kernel 'spartan' needs SpartanParams")
        return lambda A, B: spartan_cross(A, B, params, w)
    if kernel == "hamming":
        if not isinstance(params, HammingParams):
            raise ValueError("kernel 'hamming' needs HammingParams")
        return lambda A, B: hamming_cross(A, B, params)
    raise ValueError(f"unknown kernel {kernel!r}")


def _training_inputs(data: Dataset, kernel: str) -> np.ndarray:
    return data.C if kernel == "hamming" else data.X


def _resolve_noise(params, noise_variance):
    if noise_variance is not None:
        return float(noise_variance)
    nv = getattr(params, "noise_variance", None)
    return float(nv) if nv is not None else DEFAULT_NOISE


def center_scale(y: np.ndarray):
    """Sample mean and standard deviation of the outcomes; the scale falls
    back to 1 for constant (or single) observations."""
    mean = float(np.mean(y))
    scale = float(np.std(y))
    if not scale > 1e-12:
        scale = 1.0
    return mean, scale


def chol_with_escalation(G: np.ndarray, retries: int = 3) -> np.ndarray:
    """Lower Cholesky factor, retrying with 10x larger jitter up to
    `retries` times before giving up."""
    bump = kernels.JITTER_SCALE * float(np.mean(np.diag(G)))
    for attempt in range(retries + 1):
        try:
            return cholesky(G, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            pass
        except ValueError as exc:  # non-finite entries
            raise NumericFailure(str(exc)) from exc
        bump *= 10.0
        G = G + bump * np.eye(G.shape[0])
    raise NumericFailure("Cholesky factorization failed after jitter escalation")


def fit(data: Dataset, params, kernel: str = "matern52",
        noise_variance: Optional[float] = None,
        weight_config: WeightConfig = WeightConfig()) -> PosteriorSample:
    """Condition a zero-mean GP on `data` under one hyperparameter sample.

    `kernel` is one of "matern52", "se", "spartan", "hamming". Noise defaults
    to the params' own noise_variance when present, else a small floor.
    """
    noise = _resolve_noise(params, noise_variance)
    if data.n == 0:
        return PosteriorSample(params, kernel, data, None, None, 0.0, noise,
                               weight_config)
    cross = _cross_builder(params, kernel, weight_config)
    pts = _training_inputs(data, kernel)
    G = kernels.gram(pts, cross, noise)
    L = chol_with_escalation(G)
    y_mean, y_scale = center_scale(data.y)
    yc = (data.y - y_mean) / y_scale
    alpha = solve_triangular(
        L, solve_triangular(L, yc, lower=True, check_finite=False),
        lower=True, trans="T", check_finite=False)
    return PosteriorSample(params, kernel, data, L, alpha, y_mean, noise,
                           weight_config, y_scale)


def _prior_variance(params, kernel: str, w: WeightConfig, q: np.ndarray) -> np.ndarray:
    """k(x, x) for stacked query points, without building a full Gram."""
    n = q.shape[0]
    if kernel in ("matern52", "se", "hamming"):
        return np.full(n, params.signal_variance, dtype=float)
    if kernel == "spartan":
        lam_l, lam_g = kernels.weight_factors(q, params.pos, w)
        return (lam_l ** 2 * params.local.signal_variance
                + lam_g ** 2 * params.global_.signal_variance)
    raise ValueError(f"unknown kernel {kernel!r}")


def predict_many(ps: PosteriorSample, Xstar: np.ndarray,
                 Cstar: Optional[np.ndarray] = None):
    """Vectorized posterior mean/variance at stacked query points.

    Returns (mu, sigma2) arrays; sigma2 is clamped at zero.
    """
    cross = _cross_builder(ps.params, ps.kernel, ps.weight_config)
    q = Cstar if ps.kernel == "hamming" else np.atleast_2d(np.asarray(Xstar, dtype=float))
    k_diag = _prior_variance(ps.params, ps.kernel, ps.weight_config, q)
    if ps.data.n == 0:
        return np.zeros(q.shape[0]), k_diag
    pts = _training_inputs(ps.data, ps.kernel)
    Ks = cross(q, pts)
    mu = ps.y_mean + ps.y_scale * (Ks @ ps.alpha)
    V = solve_triangular(ps.chol, Ks.T, lower=True, check_finite=False)
    sigma2 = k_diag - np.sum(V * V, axis=0)
    worst = float(np.min(sigma2))
    if worst < -1e-6:
        log.warning("posterior variance clamped by %.3e", -worst)
    return mu, ps.y_scale ** 2 * np.maximum(sigma2, 0.0)


def predict(ps: PosteriorSample, x, c=None) -> Prediction:
    """Posterior predictive at a single point."""
    Cstar = None if c is None else np.atleast_2d(np.asarray(c, dtype=int))
    mu, sigma2 = predict_many(ps, np.atleast_2d(np.asarray(x, dtype=float)) if x is not None else None,
                              Cstar)
    return Prediction(float(mu[0]), float(sigma2[0]))


def log_marginal_likelihood(data: Dataset, params, kernel: str = "matern52",
                            noise_variance: Optional[float] = None,
                            weight_config: WeightConfig = WeightConfig()) -> float:
    """Gaussian log marginal likelihood of the standardized observations."""
    ps = fit(data, params, kernel, noise_variance, weight_config)
    return ps.log_marginal_likelihood()
