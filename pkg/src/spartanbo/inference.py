"""Hyperparameter priors and slice-sampling MCMC.

Positive hyperparameters are sampled in log space and the local-bump
position in logit space, so the chain lives in an unconstrained vector with
prior Jacobians folded into the target density. Each optimization iteration
re-runs burn-in from the previous iteration's final state (warm start) and
collects m consecutive post-burn-in states, each fitted into a
PosteriorSample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.linalg.lapack import dpotrf, dtrtrs
from scipy.special import expit, log_expit, logit

from . import kernels, surrogate
from .exceptions import NumericFailure, SamplerStuck
from .kernels import ArdParams, HammingParams, SpartanParams, WeightConfig
from .surrogate import Dataset, PosteriorSample

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LogNormalPrior:
    """Log-normal prior given by its median and the standard deviation of
    the log."""
    median: float
    log_sd: float

    def log_density_z(self, z):
        """Density of z = log(value); the transform Jacobian is already
        absorbed (z is plain normal)."""
        mu = math.log(self.median)
        return (-0.5 * ((z - mu) / self.log_sd) ** 2
                - math.log(self.log_sd) - 0.5 * _LOG_2PI)

    def sample_z(self, rng, size=None):
        return rng.normal(math.log(self.median), self.log_sd, size=size)


@dataclass(frozen=True)
class PriorSpec:
    """Weakly-informative priors scaled to unit-hypercube coordinates.

    The composite kernel gets its own, shorter lengthscale prior for both
    of its blocks: it exists to model functions with localized
    high-frequency structure, and a short prior keeps the surrogate curious
    enough to probe small unexplored regions instead of smoothing them
    away. The bump position is uniform on [0, 1] per dimension. noise=None
    keeps the noise variance fixed instead of sampling it.
    """
    lengthscale: LogNormalPrior = LogNormalPrior(0.5, 1.0)
    spartan_lengthscale: LogNormalPrior = LogNormalPrior(0.15, 1.0)
    signal_variance: LogNormalPrior = LogNormalPrior(1.0, 1.0)
    hamming_theta: LogNormalPrior = LogNormalPrior(1.0, 1.0)
    noise: Optional[LogNormalPrior] = None


def _uniform_logit_log_density(z):
    """Density of z = logit(u), u ~ Uniform(0,1): log sigmoid(z) + log sigmoid(-z)."""
    return log_expit(z) + log_expit(-z)


class ArdModel:
    """Packs stationary ARD hyperparameters into an unconstrained vector:
    [log lengthscales (d), log signal_variance] (+ [log noise])."""

    kernel = "matern52"

    def __init__(self, d: int, priors: PriorSpec, noise_variance: float,
                 kernel: str = "matern52"):
        self.d = d
        self.priors = priors
        self.noise_variance = noise_variance
        self.kernel = kernel
        self.learn_noise = priors.noise is not None
        self.n_params = d + 1 + (1 if self.learn_noise else 0)

    def unpack(self, z):
        ls = np.exp(z[:self.d])
        sv = math.exp(z[self.d])
        noise = math.exp(z[self.d + 1]) if self.learn_noise else self.noise_variance
        return ArdParams(ls, sv), noise

    def pack(self, params: ArdParams, noise: Optional[float] = None):
        z = np.concatenate([np.log(params.lengthscales),
                            [math.log(params.signal_variance)]])
        if self.learn_noise:
            z = np.append(z, math.log(noise if noise is not None else self.noise_variance))
        return z

    def log_prior(self, z):
        lp = float(np.sum(self.priors.lengthscale.log_density_z(z[:self.d])))
        lp += self.priors.signal_variance.log_density_z(z[self.d])
        if self.learn_noise:
            lp += self.priors.noise.log_density_z(z[self.d + 1])
        return lp

    def initial(self):
        z = np.concatenate([np.full(self.d, math.log(self.priors.lengthscale.median)),
                            [math.log(self.priors.signal_variance.median)]])
        if self.learn_noise:
            z = np.append(z, math.log(self.priors.noise.median))
        return z

    def sample_prior(self, rng):
        z = np.append(self.priors.lengthscale.sample_z(rng, self.d),
                      self.priors.signal_variance.sample_z(rng))
        if self.learn_noise:
            z = np.append(z, self.priors.noise.sample_z(rng))
        return z


class SpartanModel:
    """Unconstrained vector layout:
    [log local lengthscales (d), log local sv,
     log global lengthscales (d), log global sv,
     logit pos (d)] (+ [log noise])."""

    kernel = "spartan"

    def __init__(self, d: int, priors: PriorSpec, noise_variance: float,
                 base: str = "matern52"):
        self.d = d
        self.priors = priors
        self.noise_variance = noise_variance
        self.base = base
        self.learn_noise = priors.noise is not None
        self.n_params = 3 * d + 2 + (1 if self.learn_noise else 0)
        # slice boundaries into z
        self._i_svl = d
        self._i_lg = d + 1
        self._i_svg = 2 * d + 1
        self._i_pos = 2 * d + 2
        self._i_noise = 3 * d + 2

    def unpack(self, z):
        d = self.d
        local = ArdParams(np.exp(z[:d]), math.exp(z[self._i_svl]))
        global_ = ArdParams(np.exp(z[self._i_lg:self._i_svg]), math.exp(z[self._i_svg]))
        pos = expit(z[self._i_pos:self._i_pos + d])
        noise = math.exp(z[self._i_noise]) if self.learn_noise else self.noise_variance
        return SpartanParams(local, global_, pos, noise), noise

    def pack(self, params: SpartanParams, noise: Optional[float] = None):
        pos = np.asarray(params.pos, dtype=float)
        if np.any(pos <= 0) or np.any(pos >= 1):
            raise ValueError("pos must lie strictly inside (0, 1) in transformed space")
        z = np.concatenate([np.log(params.local.lengthscales),
                            [math.log(params.local.signal_variance)],
                            np.log(params.global_.lengthscales),
                            [math.log(params.global_.signal_variance)],
                            logit(pos)])
        if self.learn_noise:
            nv = noise if noise is not None else params.noise_variance
            z = np.append(z, math.log(nv))
        return z

    def log_prior(self, z):
        d = self.d
        pl = self.priors.spartan_lengthscale
        lp = float(np.sum(pl.log_density_z(z[:d]))
                   + np.sum(pl.log_density_z(z[self._i_lg:self._i_svg])))
        lp += self.priors.signal_variance.log_density_z(z[self._i_svl])
        lp += self.priors.signal_variance.log_density_z(z[self._i_svg])
        lp += float(np.sum(_uniform_logit_log_density(z[self._i_pos:self._i_pos + d])))
        if self.learn_noise:
            lp += self.priors.noise.log_density_z(z[self._i_noise])
        return lp

    def initial(self):
        lm = math.log(self.priors.spartan_lengthscale.median)
        sm = math.log(self.priors.signal_variance.median)
        z = np.concatenate([np.full(self.d, lm), [sm],
                            np.full(self.d, lm), [sm],
                            np.zeros(self.d)])  # logit(0.5) = 0
        if self.learn_noise:
            z = np.append(z, math.log(self.priors.noise.median))
        return z

    def sample_prior(self, rng):
        z = np.concatenate([self.priors.spartan_lengthscale.sample_z(rng, self.d),
                            [self.priors.signal_variance.sample_z(rng)],
                            self.priors.spartan_lengthscale.sample_z(rng, self.d),
                            [self.priors.signal_variance.sample_z(rng)],
                            logit(rng.random(self.d))])
        if self.learn_noise:
            z = np.append(z, self.priors.noise.sample_z(rng))
        return z


class HammingModel:
    """Unconstrained vector [log theta, log signal_variance] (+ [log noise])."""

    kernel = "hamming"

    def __init__(self, priors: PriorSpec, noise_variance: float):
        self.priors = priors
        self.noise_variance = noise_variance
        self.learn_noise = priors.noise is not None
        self.n_params = 2 + (1 if self.learn_noise else 0)

    def unpack(self, z):
        noise = math.exp(z[2]) if self.learn_noise else self.noise_variance
        return HammingParams(math.exp(z[0]), math.exp(z[1]), noise), noise

    def pack(self, params: HammingParams, noise: Optional[float] = None):
        z = np.array([math.log(params.theta), math.log(params.signal_variance)])
        if self.learn_noise:
            nv = noise if noise is not None else params.noise_variance
            z = np.append(z, math.log(nv))
        return z

    def log_prior(self, z):
        lp = self.priors.hamming_theta.log_density_z(z[0])
        lp += self.priors.signal_variance.log_density_z(z[1])
        if self.learn_noise:
            lp += self.priors.noise.log_density_z(z[2])
        return lp

    def initial(self):
        z = np.array([math.log(self.priors.hamming_theta.median),
                      math.log(self.priors.signal_variance.median)])
        if self.learn_noise:
            z = np.append(z, math.log(self.priors.noise.median))
        return z

    def sample_prior(self, rng):
        z = np.array([self.priors.hamming_theta.sample_z(rng),
                      self.priors.signal_variance.sample_z(rng)])
        if self.learn_noise:
            z = np.append(z, self.priors.noise.sample_z(rng))
        return z


def make_model(kernel: str, data: Dataset, priors: PriorSpec,
               noise_variance: float = surrogate.DEFAULT_NOISE):
    if kernel in ("matern52", "se"):
        return ArdModel(data.dim, priors, noise_variance, kernel)
    if kernel == "spartan":
        return SpartanModel(data.dim, priors, noise_variance)
    if kernel == "hamming":
        return HammingModel(priors, noise_variance)
    raise ValueError(f"unknown kernel {kernel!r}")


class PosteriorTarget:
    """Log posterior density over the transformed hyperparameter vector.

    Precomputes the per-dimension squared differences of the dataset and, for
    the composite kernel, caches the local/global kernel blocks and the
    mixing factors keyed on their parameter sub-vectors, since slice sampling
    changes one coordinate at a time.
    """

    def __init__(self, data: Dataset, model,
                 weight_config: WeightConfig = WeightConfig()):
        self.data = data
        self.model = model
        self.w = weight_config
        self.n = data.n
        if self.n:
            mean, scale = surrogate.center_scale(data.y)
            self._yc = (data.y - mean) / scale
        if model.kernel == "hamming":
            C = data.C
            if C is None:
                raise ValueError("hamming model needs a categorical block")
            if self.n:
                self._hnorm = np.sum(C[:, None, :] != C[None, :, :], axis=-1) / C.shape[1]
        elif self.n:
            self._sq = data.sq_diffs()
        self._cache = {}

    def _cached(self, key_slice, z, build):
        # one-entry cache per component: slice sampling touches one
        # coordinate at a time, so the other components' sub-vectors repeat
        slot = (key_slice.start, key_slice.stop)
        sub = z[key_slice].tobytes()
        hit = self._cache.get(slot)
        if hit is None or hit[0] != sub:
            hit = (sub, build())
            self._cache[slot] = hit
        return hit[1]

    def _gram(self, z, noise: float) -> np.ndarray:
        m = self.model
        if m.kernel == "hamming":
            sv = math.exp(z[1])
            K = sv * np.exp(-math.exp(z[0]) * self._hnorm)
        elif m.kernel == "spartan":
            d = m.d
            s_local = slice(0, d + 1)
            s_global = slice(m._i_lg, m._i_svg + 1)
            s_pos = slice(m._i_pos, m._i_pos + d)
            K_l = self._cached(s_local, z, lambda: kernels.ard_cross_from_sq(
                self._sq, ArdParams(np.exp(z[:d]), math.exp(z[d])), m.base))
            K_g = self._cached(s_global, z, lambda: kernels.ard_cross_from_sq(
                self._sq, ArdParams(np.exp(z[m._i_lg:m._i_svg]), math.exp(z[m._i_svg])), m.base))
            lam = self._cached(s_pos, z, lambda: kernels.weight_factors(
                self.data.X, expit(z[s_pos]), self.w))
            ll, lg = lam
            K = ll[:, None] * K_l * ll[None, :] + lg[:, None] * K_g * lg[None, :]
        else:
            K = kernels.ard_cross_from_sq(
                self._sq, ArdParams(np.exp(z[:m.d]), math.exp(z[m.d])), m.kernel)
        K = np.array(K)  # fresh buffer; dpotrf overwrites
        bump = noise + kernels.JITTER_SCALE * float(np.mean(np.diagonal(K)))
        K[np.diag_indices(self.n)] += bump
        return K

    def log_likelihood(self, z) -> float:
        if self.n == 0:
            return 0.0
        if self.model.learn_noise:
            noise = math.exp(z[-1])
        else:
            noise = self.model.noise_variance
        G = self._gram(z, noise)
        L, info = dpotrf(G, lower=1, overwrite_a=1)
        if info != 0:
            # fall back to the escalating-jitter path; reject on failure
            try:
                params, noise = self.model.unpack(z)
                return surrogate.log_marginal_likelihood(
                    self.data, params, self.model.kernel, noise, self.w)
            except NumericFailure:
                return -math.inf
        v, info = dtrtrs(L, self._yc, lower=1)
        if info != 0:
            return -math.inf
        return float(-0.5 * v @ v - np.sum(np.log(np.diagonal(L)))
                     - 0.5 * self.n * _LOG_2PI)

    def __call__(self, z) -> float:
        if not np.all(np.isfinite(z)):
            return -math.inf
        lp = self.model.log_prior(z)
        if not np.isfinite(lp):
            return -math.inf
        ll = self.log_likelihood(z)
        if not np.isfinite(ll):
            return -math.inf
        return lp + ll


def log_posterior_density(params, data: Dataset, priors: PriorSpec,
                          kernel: str = "matern52",
                          noise_variance: float = surrogate.DEFAULT_NOISE,
                          weight_config: WeightConfig = WeightConfig()) -> float:
    """Log marginal likelihood plus log prior (with transform Jacobians) for
    one hyperparameter sample; -inf outside the support."""
    model = make_model(kernel, data, priors, noise_variance)
    try:
        z = model.pack(params)
    except (ValueError, FloatingPointError, OverflowError):
        return -math.inf
    target = PosteriorTarget(data, model, weight_config)
    return target(z)


def slice_step(state: np.ndarray, log_density: Callable[[np.ndarray], float],
               rng: np.random.Generator, width: float = 1.0,
               max_stepout: int = 8, max_shrink: int = 1000) -> np.ndarray:
    """One sweep of univariate stepping-out/shrinkage slice sampling over all
    coordinates in random order. Returns a new state with finite density."""
    z = np.array(state, dtype=float)
    logp = log_density(z)
    if not np.isfinite(logp):
        raise ValueError("slice sampling requires a finite density at the initial state")
    for k in rng.permutation(z.shape[0]):
        log_u = logp + math.log(rng.random())
        x0 = z[k]
        lo = x0 - rng.random() * width
        hi = lo + width

        def f(v):
            z[k] = v
            out = log_density(z)
            z[k] = x0
            return out

        j = 0
        f_lo = f(lo)
        while f_lo > log_u and j < max_stepout:
            lo -= width
            f_lo = f(lo)
            j += 1
        j = 0
        f_hi = f(hi)
        while f_hi > log_u and j < max_stepout:
            hi += width
            f_hi = f(hi)
            j += 1

        for _ in range(max_shrink):
            v = lo + rng.random() * (hi - lo)
            fv = f(v)
            if fv > log_u:
                z[k] = v
                logp = fv
                break
            if v < x0:
                lo = v
            else:
                hi = v
        else:
            raise SamplerStuck(f"slice bracket shrank {max_shrink} times on coordinate {k}")
    return z


def _informed_starts(data: Dataset, model) -> List[np.ndarray]:
    """Candidate chain initializations for the composite-kernel model.

    The posterior over the bump position is multimodal and slice sweeps do
    not hop between its basins, so each refresh also considers states with
    the bump placed at the largest-magnitude standardized outcomes.
    """
    starts = [model.initial()]
    if not isinstance(model, SpartanModel) or data.n == 0:
        return starts
    mean, scale = surrogate.center_scale(data.y)
    resid = np.abs((data.y - mean) / scale)
    order = np.argsort(resid)[::-1]
    med = model.priors.spartan_lengthscale.median
    d = model.d
    for idx in order[:2]:
        pos = np.clip(data.X[idx], 1e-3, 1.0 - 1e-3)
        for ll in (med, med / 4.0):
            params = SpartanParams(ArdParams([ll] * d, 1.0),
                                   ArdParams([med] * d, 1.0), pos)
            starts.append(model.pack(params))
    return starts


def _map_restart(z: np.ndarray, data: Dataset, model, target,
                 maxfev: int = 300) -> np.ndarray:
    """Pick the chain's starting state: the warm state, or a candidate start
    refined by a short derivative-free climb of the posterior density,
    whichever scores higher. Deterministic; never consumes rng state."""
    from scipy.optimize import minimize

    best_z, best_v = z, target(z)
    for z0 in _informed_starts(data, model):
        res = minimize(lambda zz: -target(zz), z0, method="Nelder-Mead",
                       options={"maxfev": maxfev, "xatol": 1e-3, "fatol": 1e-3})
        if np.all(np.isfinite(res.x)) and -res.fun > best_v:
            best_z, best_v = res.x, -res.fun
    return np.array(best_z, dtype=float)


@dataclass
class McmcEnsemble:
    """m fitted posterior samples standing in for the marginalized surrogate."""
    samples: List[PosteriorSample]
    m: int
    burn_in: int
    final_state: np.ndarray
    warning: bool = False

    @property
    def data(self) -> Dataset:
        return self.samples[0].data


def sample_ensemble(data: Dataset, priors: PriorSpec, m: int = 10,
                    burn_in: int = 100, rng: Optional[np.random.Generator] = None,
                    init: Optional[np.ndarray] = None, kernel: str = "matern52",
                    noise_variance: float = surrogate.DEFAULT_NOISE,
                    weight_config: WeightConfig = WeightConfig(),
                    width: float = 1.0,
                    informed_restarts: bool = True) -> McmcEnsemble:
    """Run burn-in from `init` (warm start) then collect m consecutive
    states, fitting a PosteriorSample per state. For the composite kernel
    the warm state competes against MAP-refined informed starts before
    burn-in begins. Falls back to prior draws with a warning flag when the
    sampler gets stuck."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    model = make_model(kernel, data, priors, noise_variance)
    target = PosteriorTarget(data, model, weight_config)
    z = np.array(init, dtype=float) if init is not None else model.initial()
    if not np.isfinite(target(z)):
        z = model.initial()
    if informed_restarts and isinstance(model, SpartanModel) and data.n:
        z = _map_restart(z, data, model, target)
    warning = False
    states = []
    try:
        for _ in range(burn_in):
            z = slice_step(z, target, rng, width)
        for _ in range(m):
            z = slice_step(z, target, rng, width)
            states.append(z)
    except SamplerStuck:
        warning = True
        states = [model.sample_prior(rng) for _ in range(m)]
        z = states[-1]
    samples = []
    for zs in states:
        params, noise = model.unpack(zs)
        samples.append(surrogate.fit(data, params, model.kernel, noise, weight_config))
    return McmcEnsemble(samples, m, burn_in, z, warning)
