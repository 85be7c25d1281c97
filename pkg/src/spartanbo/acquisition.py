"""Ensemble-averaged acquisition criteria and the inner maximizer.

Expected improvement is summed over the MCMC ensemble members, exactly as
the optimization loop ranks candidates; since the ensemble size is constant
within a run the argmax is unaffected by the missing 1/m.

The information-gain term ships in two modes. "entropy" (default) is the
moment-matched Gaussian-mixture entropy minus the mean conditional entropy,
which is nonnegative and vanishes when all members agree. "verbatim" keeps
the raw sum form (it grows with the ensemble size and flips sign); it exists
for fidelity experiments only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import norm

from .exceptions import NumericFailure
from .inference import McmcEnsemble
from .kernels import SpartanParams
from .surrogate import predict_many

_SIGMA2_FLOOR = 1e-18  # guards log terms when a member variance hits zero


@dataclass(frozen=True)
class PredictionSet:
    """Per-ensemble-member predictive means and variances at one point."""
    mu: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)))
        object.__setattr__(self, "sigma2", np.atleast_1d(np.asarray(self.sigma2, dtype=float)))
        if self.mu.shape != self.sigma2.shape or self.mu.size < 1:
            raise ValueError("mu and sigma2 must be equal-length, nonempty")
        if np.any(self.sigma2 < 0):
            raise ValueError("sigma2 must be nonnegative")

    @property
    def m(self) -> int:
        return self.mu.shape[0]

    @property
    def mu_hat(self) -> float:
        return float(np.mean(self.mu))


@dataclass(frozen=True)
class AcquisitionConfig:
    kind: str = "ei"            # "ei" | "eiig"
    alpha: float = 1.0          # information-gain weight before annealing
    ig_mode: str = "entropy"    # "entropy" | "verbatim"
    candidates: Optional[int] = None   # default 500 * d
    refinements: Optional[int] = None  # default 50 * d

    def __post_init__(self):
        if self.kind not in ("ei", "eiig"):
            raise ValueError(f"unknown acquisition kind {self.kind!r}")
        if self.ig_mode not in ("entropy", "verbatim"):
            raise ValueError(f"unknown ig_mode {self.ig_mode!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.candidates is not None and self.candidates < 1:
            raise ValueError("candidate budget must be >= 1")
        if self.refinements is not None and self.refinements < 0:
            raise ValueError("refinement budget must be >= 0")


def _ei_terms(mu: np.ndarray, sigma: np.ndarray, y_best: float) -> np.ndarray:
    """Per-member EI contributions; the sigma=0 limit is max(y_best - mu, 0)."""
    imp = y_best - mu
    out = np.where(imp > 0, imp, 0.0)
    pos = sigma > 0
    if np.any(pos):
        z = imp[pos] / sigma[pos]
        out = np.array(out, dtype=float)
        out[pos] = imp[pos] * norm.cdf(z) + sigma[pos] * norm.pdf(z)
    return out


def expected_improvement(ps: PredictionSet, y_best: float) -> float:
    """Sum over ensemble members of the closed-form expected improvement."""
    if not np.isfinite(y_best):
        raise ValueError("y_best must be finite")
    return float(np.sum(_ei_terms(ps.mu, np.sqrt(ps.sigma2), y_best)))


def information_gain(ps: PredictionSet, mode: str = "entropy") -> float:
    """Hyperparameter information gain from one hypothetical observation."""
    mu, s2 = ps.mu, ps.sigma2
    dev2 = (mu - ps.mu_hat) ** 2
    if mode == "entropy":
        if np.any(s2 == 0):
            raise ValueError("entropy-mode information gain needs sigma2 > 0")
        return float(0.5 * math.log(np.mean(dev2 + s2)) - 0.5 * np.mean(np.log(s2)))
    if mode == "verbatim":
        if np.any(s2 == 0):
            raise ValueError("verbatim-mode information gain needs sigma2 > 0")
        return float(-math.log(np.sum(dev2 + s2)) + np.sum(np.log(s2)))
    raise ValueError(f"unknown ig mode {mode!r}")


def eiig(ps: PredictionSet, y_best: float, alpha: float, n: int,
         mode: str = "entropy") -> float:
    """EI plus an annealed alpha/n^2 information-gain bonus; converges to
    plain EI as the iteration count grows."""
    if n < 1:
        raise ValueError("iteration count must be >= 1")
    value = expected_improvement(ps, y_best)
    if alpha > 0:
        value += (alpha / n ** 2) * information_gain(ps, mode)
    return value


def predict_set(ensemble: McmcEnsemble, x, c=None) -> PredictionSet:
    """Map predict over the ensemble members, preserving order."""
    mu, s2 = predict_matrix(ensemble, np.atleast_2d(np.asarray(x, dtype=float)),
                            None if c is None else np.atleast_2d(np.asarray(c, dtype=int)))
    return PredictionSet(mu[:, 0], s2[:, 0])


def predict_matrix(ensemble: McmcEnsemble, X: np.ndarray,
                   C: Optional[np.ndarray] = None):
    """Stacked per-member predictions: (m, n_points) mean and variance."""
    mus, s2s = [], []
    for ps in ensemble.samples:
        mu, s2 = predict_many(ps, X, C)
        mus.append(mu)
        s2s.append(s2)
    return np.array(mus), np.array(s2s)


def make_evaluator(ensemble: McmcEnsemble, cfg: AcquisitionConfig,
                   y_best: float, iteration: int) -> Callable[[np.ndarray], np.ndarray]:
    """Batched acquisition evaluator over stacked unit points."""

    def evaluate(X: np.ndarray) -> np.ndarray:
        mu, s2 = predict_matrix(ensemble, X)
        sigma = np.sqrt(s2)
        imp = y_best - mu
        z = np.divide(imp, sigma, out=np.zeros_like(imp), where=sigma > 0)
        terms = np.where(sigma > 0, imp * norm.cdf(z) + sigma * norm.pdf(z),
                         np.maximum(imp, 0.0))
        values = np.sum(terms, axis=0)
        if cfg.kind == "eiig" and cfg.alpha > 0:
            s2f = np.maximum(s2, _SIGMA2_FLOOR)
            dev2 = (mu - np.mean(mu, axis=0)) ** 2
            if cfg.ig_mode == "entropy":
                ig = (0.5 * np.log(np.mean(dev2 + s2f, axis=0))
                      - 0.5 * np.mean(np.log(s2f), axis=0))
            else:
                ig = -np.log(np.sum(dev2 + s2f, axis=0)) + np.sum(np.log(s2f), axis=0)
            values = values + (cfg.alpha / iteration ** 2) * ig
        return values

    return evaluate


def maximize(evaluator: Callable[[np.ndarray], np.ndarray], space,
             ensemble: McmcEnsemble, rng: np.random.Generator,
             cfg: AcquisitionConfig) -> np.ndarray:
    """Pick the next unit-cube query point.

    Seeds a candidate set (uniform draws plus the observed points and any
    ensemble bump positions), then refines the best candidate with a
    bound-constrained coordinate pattern search. Deterministic given the rng
    state; ties break on the lowest candidate index.
    """
    d = space.dim if hasattr(space, "dim") else int(space)
    if d < 1:
        raise ValueError("continuous space must be nonempty")
    n_cand = cfg.candidates if cfg.candidates is not None else 500 * d
    cands = [rng.random((n_cand, d))]
    data = ensemble.data
    if data.n:
        cands.append(data.X)
    pos = [ps.params.pos for ps in ensemble.samples
           if isinstance(ps.params, SpartanParams)]
    if pos:
        cands.append(np.array(pos))
    X = np.clip(np.vstack(cands), 0.0, 1.0)
    values = evaluator(X)
    if not np.any(np.isfinite(values)):
        raise NumericFailure("acquisition is non-finite on every candidate")
    best = int(np.nanargmax(values))
    x, v = X[best].copy(), values[best]

    budget = cfg.refinements if cfg.refinements is not None else 50 * d
    step = 0.25
    evals = 0
    while evals < budget and step > 1e-6:
        trials = np.repeat(x[None, :], 2 * d, axis=0)
        for k in range(d):
            trials[2 * k, k] = min(x[k] + step, 1.0)
            trials[2 * k + 1, k] = max(x[k] - step, 0.0)
        tv = evaluator(trials)
        evals += 2 * d
        j = int(np.nanargmax(tv))
        if tv[j] > v:
            x, v = trials[j].copy(), tv[j]
        else:
            step *= 0.5
    return x
