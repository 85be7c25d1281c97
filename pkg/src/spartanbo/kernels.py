"""Covariance functions.

Stationary ARD kernels (squared exponential and Matern 5/2), a Hamming
kernel for categorical coordinates, and the weighted local+global composite
kernel whose mixing weights are Gaussian bumps in the unit hypercube.

Two calling conventions coexist:

* pointwise operations (``se_ard``, ``matern52_ard``, ``hamming_kernel``,
  ``weights``, ``spartan_kernel``) take single points and validate inputs;
* cross-covariance builders (``*_cross``) take stacked ``(n, d)`` arrays and
  are what ``gram`` and the surrogate use internally.

All functions are pure; continuous points are expected in unit-hypercube
coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .exceptions import NumericFailure

# Relative diagonal jitter applied by gram(); escalated by the surrogate on
# factorization failure.
JITTER_SCALE = 1e-10

_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class ArdParams:
    """Hyperparameters of one stationary ARD kernel: a lengthscale per input
    dimension plus a signal variance."""

    lengthscales: np.ndarray
    signal_variance: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if np.any(ls <= 0) or not np.all(np.isfinite(ls)):
            raise ValueError("lengthscales must be positive and finite")
        if self.signal_variance <= 0 or not np.isfinite(self.signal_variance):
            raise ValueError("signal_variance must be positive and finite")

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[0]


@dataclass(frozen=True)
class WeightConfig:
    """Parameters of the Gaussian weighting bumps: a broad bump anchored at
    the center of the unit cube and a narrow bump at a learned position."""

    global_mean: float = 0.5
    global_variance: float = 10.0
    local_variance: float = 0.05

    def __post_init__(self):
        if self.global_variance <= 0 or self.local_variance <= 0:
            raise ValueError("weight variances must be positive")


@dataclass(frozen=True)
class SpartanParams:
    """Full hyperparameter set of the composite kernel: local and global ARD
    blocks plus the local bump position, one coordinate per dimension."""

    local: ArdParams
    global_: ArdParams
    pos: np.ndarray
    noise_variance: float = 0.0

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.pos, dtype=float))
        object.__setattr__(self, "pos", pos)
        if np.any(pos < 0) or np.any(pos > 1):
            raise ValueError("pos coordinates must lie in [0, 1]")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")
        if self.local.dim != self.global_.dim or self.local.dim != pos.shape[0]:
            raise ValueError("local, global and pos dimensions disagree")

    @property
    def dim(self) -> int:
        return self.pos.shape[0]


@dataclass(frozen=True)
class HammingParams:
    """Hyperparameters of the categorical GP: Hamming decay rate plus the
    usual amplitude/noise pair."""

    theta: float
    signal_variance: float = 1.0
    noise_variance: float = 0.0

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.signal_variance <= 0:
            raise ValueError("signal_variance must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")


def _check_pair(x, x2, dim):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape or x.shape[0] != dim:
        raise ValueError(
            f"point dimensions {x.shape[0]}/{x2.shape[0]} do not match kernel dimension {dim}"
        )
    return x, x2


def se_ard(x, x2, p: ArdParams) -> float:
    """Squared-exponential ARD kernel: sv * exp(-0.5 * sum ((dx_k/l_k)^2))."""
    x, x2 = _check_pair(x, x2, p.dim)
    q = np.sum(((x - x2) / p.lengthscales) ** 2)
    return p.signal_variance * math.exp(-0.5 * q)


def matern52_ard(x, x2, p: ArdParams) -> float:
    """Matern 5/2 ARD kernel: sv * (1 + sqrt5 r + 5r^2/3) * exp(-sqrt5 r)."""
    x, x2 = _check_pair(x, x2, p.dim)
    r2 = np.sum(((x - x2) / p.lengthscales) ** 2)
    r = math.sqrt(r2)
    return p.signal_variance * (1.0 + _SQRT5 * r + 5.0 * r2 / 3.0) * math.exp(-_SQRT5 * r)


def hamming_kernel(c, c2, theta: float) -> float:
    """Categorical kernel exp(-theta * h / d) with h the Hamming distance.

    Normalizing by the number of categorical dimensions d keeps theta on a
    scale-free footing across arities.
    """
    c = np.atleast_1d(np.asarray(c))
    c2 = np.atleast_1d(np.asarray(c2))
    if c.shape != c2.shape:
        raise ValueError("categorical points have different arity")
    d = c.shape[0]
    h = int(np.sum(c != c2))
    return math.exp(-theta * h / d)


def _log_density_sum(X: np.ndarray, mean, variance: float) -> np.ndarray:
    """Sum over dimensions of univariate normal log-pdfs, vectorized over
    rows of X. `mean` broadcasts against the last axis."""
    d = X.shape[-1]
    q = np.sum((X - mean) ** 2, axis=-1) / variance
    return -0.5 * q - 0.5 * d * math.log(2.0 * math.pi * variance)


def weight_factors(X: np.ndarray, pos: np.ndarray, w: WeightConfig):
    """Local/global mixing factors (lambda_l, lambda_g) for rows of X.

    Computed in log space as sqrt of a logistic of the log-density gap, which
    keeps lambda_l^2 + lambda_g^2 = 1 to machine precision even when one bump
    underflows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    log_nu_l = _log_density_sum(X, pos, w.local_variance)
    log_nu_g = _log_density_sum(X, w.global_mean, w.global_variance)
    delta = log_nu_l - log_nu_g
    lam_l = np.sqrt(expit(delta))
    lam_g = np.sqrt(expit(-delta))
    return lam_l, lam_g


def weights(x, pos, w: WeightConfig = WeightConfig()):
    """Pointwise mixing weights (lambda_local, lambda_global) at x.

    Both x and pos must lie in the unit hypercube.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pos = np.atleast_1d(np.asarray(pos, dtype=float))
    if x.shape != pos.shape:
        raise ValueError("x and pos dimensions disagree")
    if np.any(x < 0) or np.any(x > 1) or np.any(pos < 0) or np.any(pos > 1):
        raise ValueError("x and pos must lie in [0, 1]^d")
    lam_l, lam_g = weight_factors(x[None, :], pos, w)
    return float(lam_l[0]), float(lam_g[0])


def spartan_kernel(x, x2, sp: SpartanParams, w: WeightConfig = WeightConfig(),
                   base: str = "matern52") -> float:
    """Composite nonstationary kernel
    lam_l(x) lam_l(x') k_local(x, x') + lam_g(x) lam_g(x') k_global(x, x')."""
    base_fn = _POINTWISE_BASES[base]
    x, x2 = _check_pair(x, x2, sp.dim)
    ll1, lg1 = weight_factors(x[None, :], sp.pos, w)
    ll2, lg2 = weight_factors(x2[None, :], sp.pos, w)
    k_l = base_fn(x, x2, sp.local)
    k_g = base_fn(x, x2, sp.global_)
    return float(ll1[0] * ll2[0] * k_l + lg1[0] * lg2[0] * k_g)


_POINTWISE_BASES = {"se": se_ard, "matern52": matern52_ard}


# ---------------------------------------------------------------------------
# cross-covariance builders (stacked points)
# ---------------------------------------------------------------------------

def sq_diff_tensor(X: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape (n, m, d). Exactly symmetric
    when X is X2 (unlike dot-product distance formulas)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    return (X[:, None, :] - X2[None, :, :]) ** 2


def ard_cross_from_sq(sq: np.ndarray, p: ArdParams, base: str = "matern52") -> np.ndarray:
    """ARD kernel matrix from a precomputed squared-difference tensor."""
    inv_l2 = 1.0 / (p.lengthscales ** 2)
    r2 = sq @ inv_l2
    if base == "se":
        return p.signal_variance * np.exp(-0.5 * r2)
    if base == "matern52":
        r = np.sqrt(r2)
        return p.signal_variance * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-_SQRT5 * r)
    raise ValueError(f"unknown base kernel {base!r}")


def se_ard_cross(X, X2, p: ArdParams) -> np.ndarray:
    return ard_cross_from_sq(sq_diff_tensor(X, X2), p, base="se")


def matern52_ard_cross(X, X2, p: ArdParams) -> np.ndarray:
    return ard_cross_from_sq(sq_diff_tensor(X, X2), p, base="matern52")


def spartan_cross_from_sq(sq, lam1, lam2, sp: SpartanParams, base: str = "matern52"):
    """Composite kernel matrix given precomputed squared differences and
    mixing factors (lam_l, lam_g) for both point sets."""
    k_l = ard_cross_from_sq(sq, sp.local, base)
    k_g = ard_cross_from_sq(sq, sp.global_, base)
    ll1, lg1 = lam1
    ll2, lg2 = lam2
    return ll1[:, None] * k_l * ll2[None, :] + lg1[:, None] * k_g * lg2[None, :]


def spartan_cross(X, X2, sp: SpartanParams, w: WeightConfig = WeightConfig(),
                  base: str = "matern52") -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    lam1 = weight_factors(X, sp.pos, w)
    lam2 = weight_factors(X2, sp.pos, w)
    return spartan_cross_from_sq(sq_diff_tensor(X, X2), lam1, lam2, sp, base)


def hamming_cross(C, C2, p: HammingParams) -> np.ndarray:
    """Hamming kernel matrix over stacked categorical points (n, d) ints."""
    C = np.atleast_2d(np.asarray(C))
    C2 = np.atleast_2d(np.asarray(C2))
    if C.shape[1] != C2.shape[1]:
        raise ValueError("categorical points have different arity")
    d = C.shape[1]
    h = np.sum(C[:, None, :] != C2[None, :, :], axis=-1)
    return p.signal_variance * np.exp(-p.theta * h / d)


def gram(X: np.ndarray, cross, noise_variance: float = 0.0,
         jitter_scale: float = JITTER_SCALE) -> np.ndarray:
    """Gram matrix cross(X, X) with noise and relative jitter on the diagonal.

    ``cross`` is a cross-covariance builder taking two stacked point arrays.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    G = np.asarray(cross(X, X), dtype=float)
    if not np.all(np.isfinite(G)):
        raise NumericFailure("kernel produced non-finite covariance values")
    n = G.shape[0]
    jitter = jitter_scale * float(np.mean(np.diag(G)))
    G[np.diag_indices(n)] += noise_variance + jitter
    return G
