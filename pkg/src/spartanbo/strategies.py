"""Optimization loops: plain GP optimization, the nonstationary composite
variant, the paired-perturbation variant, and the hierarchical mixed-space
loop. Also the Latin-hypercube initial design.

Every loop is a sequential decision process producing a Trace: one record
per objective evaluation with phase tags, running incumbent, and cumulative
wall time. Runs are deterministic given (config, seed).
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from scipy.stats import norm

from .acquisition import (AcquisitionConfig, make_evaluator, maximize,
                          predict_matrix)
from .inference import PriorSpec, sample_ensemble
from .space import SearchSpace
from .surrogate import Dataset

__all__ = [
    "SearchSpace", "RunConfig", "SpboConfig", "HboConfig", "Trace",
    "TraceRecord", "latin_hypercube", "run_bo", "run_sbo", "run_spbo",
    "run_hbo", "ALGORITHMS", "run_algorithm",
]


def latin_hypercube(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Space-filling design in [0,1]^d: per dimension, one point jittered
    uniformly inside each of n equal bins."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = np.empty((n, d))
    for k in range(d):
        out[:, k] = (rng.permutation(n) + rng.random(n)) / n
    return out


@dataclass(frozen=True)
class SpboConfig:
    """Perturbation schedule: magnitude c / i^gamma in unit coordinates,
    applied for the first T paired iterations. T=None means a quarter of the
    evaluation budget."""
    c: float = 0.1
    gamma: float = 0.101
    T: Optional[int] = None

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("spbo.c must be positive")
        if not 0 < self.gamma <= 1:
            raise ValueError("spbo.gamma must lie in (0, 1]")
        if self.T is not None and self.T < 0:
            raise ValueError("spbo.T must be nonnegative")


@dataclass(frozen=True)
class HboConfig:
    """Hierarchical budget: N_c outer (continuous) steps, N_d inner
    (categorical) evaluations per outer step. With reevaluate=True the inner
    optimum is re-queried once per outer step (for noisy objectives)."""
    N_c: int = 10
    N_d: int = 4
    reevaluate: bool = False

    def __post_init__(self):
        if self.N_c < 1 or self.N_d < 1:
            raise ValueError("hbo budgets must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    n_init: int = 10
    n_iter: int = 20
    m: int = 10
    burn_in: int = 100
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    kernel: str = "matern52"      # matern52 | se | spartan
    spbo: SpboConfig = field(default_factory=SpboConfig)
    hbo: HboConfig = field(default_factory=HboConfig)
    seed: int = 0
    noise_variance: float = 1e-6
    priors: PriorSpec = field(default_factory=PriorSpec)
    slice_width: float = 1.0

    def __post_init__(self):
        for name in ("n_init", "n_iter", "m", "burn_in"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.kernel not in ("matern52", "se", "spartan"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")


@dataclass
class TraceRecord:
    iteration: int
    phase: str                    # init | bo | perturbation | hbo-inner | hbo-outer
    x: np.ndarray                 # raw continuous coordinates
    cats: Tuple[int, ...]
    y: float
    best_y: float
    wall_ms: float
    meta: dict = field(default_factory=dict, compare=False)  # diagnostics, not serialized


@dataclass
class Trace:
    algorithm: str
    seed: int
    records: List[TraceRecord] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def best_y(self) -> float:
        return self.records[-1].best_y

    def best_series(self) -> np.ndarray:
        return np.array([r.best_y for r in self.records])

    def validate(self) -> None:
        best = math.inf
        for i, r in enumerate(self.records):
            best = min(best, r.y)
            if r.best_y != best:
                raise AssertionError(f"record {i}: best_y is not the running minimum")


class _Recorder:
    """Evaluates the objective, tracks the incumbent, penalizes non-finite
    outcomes with the worst value seen, and appends trace records."""

    def __init__(self, objective: Callable, space: SearchSpace, trace: Trace):
        self.objective = objective
        self.space = space
        self.trace = trace
        self.best = math.inf
        self.worst = -math.inf
        self._t0 = time.perf_counter()

    @property
    def count(self) -> int:
        return len(self.trace.records)

    def evaluate(self, x_unit: np.ndarray, phase: str,
                 cats: Optional[Tuple[int, ...]] = None, meta: Optional[dict] = None) -> float:
        x_raw = self.space.from_unit(x_unit) if self.space.dim else np.empty(0)
        y = self.objective(x_raw) if cats is None else self.objective(x_raw, cats)
        y = float(y)
        if not math.isfinite(y):
            y = self.worst if math.isfinite(self.worst) else 0.0
            self.trace.warnings.append(
                f"non-finite objective at record {self.count + 1}; penalized with {y}")
        self.best = min(self.best, y)
        self.worst = max(self.worst, y)
        wall_ms = (time.perf_counter() - self._t0) * 1e3
        self.trace.records.append(TraceRecord(
            iteration=self.count + 1, phase=phase, x=np.asarray(x_raw, dtype=float),
            cats=tuple(int(c) for c in cats) if cats is not None else (),
            y=y, best_y=self.best, wall_ms=wall_ms, meta=dict(meta or {})))
        return y


def _resolve_rng(cfg: RunConfig, rng):
    if rng is None:
        return np.random.default_rng(cfg.seed), cfg.seed
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng)), int(rng)
    return rng, cfg.seed


def _ensemble(data: Dataset, cfg: RunConfig, rng, state, kernel: str):
    return sample_ensemble(
        data, cfg.priors, m=cfg.m, burn_in=cfg.burn_in, rng=rng, init=state,
        kernel=kernel, noise_variance=cfg.noise_variance, width=cfg.slice_width)


def _bo_core(objective, space: SearchSpace, cfg: RunConfig, rng, seed: int,
             kernel: str, algorithm: str, perturb: Optional[SpboConfig]) -> Trace:
    trace = Trace(algorithm=algorithm, seed=seed)
    rec = _Recorder(objective, space, trace)
    d = space.dim
    X0 = latin_hypercube(cfg.n_init, d, rng)
    ys = [rec.evaluate(X0[i], "init") for i in range(cfg.n_init)]
    data = Dataset(X0, np.array(ys))

    budget = cfg.n_iter
    T = perturb.T if perturb is not None and perturb.T is not None else (
        math.ceil(budget / 4) if perturb is not None else 0)
    state = None
    i = 0
    n_evals = 0
    while n_evals < budget:
        i += 1
        ensemble = _ensemble(data, cfg, rng, state, kernel)
        state = ensemble.final_state
        if ensemble.warning:
            trace.warnings.append(f"sampler fell back to prior draws at step {i}")
        evaluator = make_evaluator(ensemble, cfg.acquisition,
                                   y_best=float(np.min(data.y)), iteration=i)
        x = maximize(evaluator, space, ensemble, rng, cfg.acquisition)
        y = rec.evaluate(x, "bo", meta={"step": i})
        data = data.append(x, y)
        n_evals += 1
        if perturb is not None and i < T and n_evals < budget:
            delta = rng.integers(0, 2, d) * 2 - 1
            step = perturb.c / i ** perturb.gamma
            x_pre = x + step * delta
            x_j = np.clip(x_pre, 0.0, 1.0)
            y_j = rec.evaluate(x_j, "perturbation",
                               meta={"step": i, "pre_clip": x_pre,
                                     "paired": x.copy(), "magnitude": step})
            data = data.append(x_j, y_j)
            n_evals += 1
    return trace


def run_bo(objective, space: SearchSpace, cfg: RunConfig, rng=None) -> Trace:
    """Stationary-kernel optimization loop: Latin-hypercube init, then per
    iteration an MCMC ensemble refresh, acquisition maximization, and one
    objective evaluation."""
    rng, seed = _resolve_rng(cfg, rng)
    kernel = cfg.kernel if cfg.kernel != "spartan" else "matern52"
    return _bo_core(objective, space, cfg, rng, seed, kernel, "bo", None)


def run_sbo(objective, space: SearchSpace, cfg: RunConfig, rng=None) -> Trace:
    """Same loop with the weighted local+global composite kernel; the bump
    position is sampled jointly with the kernel hyperparameters."""
    rng, seed = _resolve_rng(cfg, rng)
    return _bo_core(objective, space, cfg, rng, seed, "spartan", "sbo", None)


def run_spbo(objective, space: SearchSpace, cfg: RunConfig, rng=None) -> Trace:
    """Paired-perturbation loop: each selected point is followed (early on)
    by a +/-1-per-coordinate perturbation of decaying magnitude, and both
    evaluations enter the dataset."""
    rng, seed = _resolve_rng(cfg, rng)
    kernel = "spartan" if cfg.kernel == "spartan" else cfg.kernel
    return _bo_core(objective, space, cfg, rng, seed, kernel, "spbo", cfg.spbo)


def _all_combos(cards: Tuple[int, ...]) -> np.ndarray:
    return np.array(list(itertools.product(*(range(c) for c in cards))), dtype=int)


def _inner_categorical(objective, x_c_unit, space: SearchSpace, cfg: RunConfig,
                       rng, rec: _Recorder):
    """Optimize the categorical block at a fixed continuous point, spending
    at most N_d evaluations. Returns (best_cats, best_y)."""
    cards = space.categorical
    combos = _all_combos(cards)
    n_d = cfg.hbo.N_d
    if combos.shape[0] <= n_d:
        best = (None, math.inf)
        for c in combos:
            y = rec.evaluate(x_c_unit, "hbo-inner", cats=tuple(c))
            if y < best[1]:
                best = (tuple(c), y)
        return best

    # inner loop over a categorical GP when enumeration exceeds the budget
    order = rng.permutation(combos.shape[0])
    n_seed = min(2, n_d)
    seen = {}
    for idx in order[:n_seed]:
        c = tuple(combos[idx])
        seen[c] = rec.evaluate(x_c_unit, "hbo-inner", cats=c)
    state = None
    while len(seen) < n_d:
        C = np.array(list(seen), dtype=int)
        data = Dataset(np.zeros((len(seen), 0)), np.array(list(seen.values())), C)
        ensemble = sample_ensemble(
            data, cfg.priors, m=cfg.m, burn_in=cfg.burn_in, rng=rng, init=state,
            kernel="hamming", noise_variance=cfg.noise_variance, width=cfg.slice_width)
        state = ensemble.final_state
        remaining = np.array([c for c in map(tuple, combos) if c not in seen], dtype=int)
        mu, s2 = predict_matrix(ensemble, None, remaining)
        sigma = np.sqrt(s2)
        imp = float(np.min(data.y)) - mu
        z = np.divide(imp, sigma, out=np.zeros_like(imp), where=sigma > 0)
        ei = np.sum(np.where(sigma > 0, imp * norm.cdf(z) + sigma * norm.pdf(z),
                             np.maximum(imp, 0.0)), axis=0)
        c = tuple(remaining[int(np.argmax(ei))])
        seen[c] = rec.evaluate(x_c_unit, "hbo-inner", cats=c)
    best_c = min(seen, key=seen.get)
    return best_c, seen[best_c]


def run_hbo(objective, space: SearchSpace, cfg: RunConfig, rng=None) -> Trace:
    """Hierarchical loop for mixed spaces: an outer GP over the continuous
    block, where evaluating an outer point means fully optimizing the
    categorical block and returning the best inner observation."""
    if space.dim < 1 or space.n_categorical < 1:
        raise ValueError("hbo needs both continuous and categorical blocks")
    rng, seed = _resolve_rng(cfg, rng)
    trace = Trace(algorithm="hbo", seed=seed)
    rec = _Recorder(objective, space, trace)

    X0 = latin_hypercube(cfg.n_init, space.dim, rng)
    ys = []
    for i in range(cfg.n_init):
        cats = tuple(int(rng.integers(0, c)) for c in space.categorical)
        ys.append(rec.evaluate(X0[i], "init", cats=cats))
    # init points are observed at arbitrary categories, so they only upper
    # bound the conditional-best objective the outer GP models; use them to
    # seed the first step and fit on outer observations alone afterwards
    init_data = Dataset(X0, np.array(ys))
    outer = Dataset(np.zeros((0, space.dim)), np.zeros(0))

    state = None
    outer_kernel = cfg.kernel
    for n in range(1, cfg.hbo.N_c + 1):
        data = outer if outer.n else init_data
        ensemble = _ensemble(data, cfg, rng, state, outer_kernel)
        state = ensemble.final_state
        if ensemble.warning:
            trace.warnings.append(f"sampler fell back to prior draws at outer step {n}")
        evaluator = make_evaluator(ensemble, cfg.acquisition,
                                   y_best=float(np.min(data.y)), iteration=n)
        x_c = maximize(evaluator, space, ensemble, rng, cfg.acquisition)
        best_c, best_y = _inner_categorical(objective, x_c, space, cfg, rng, rec)
        if cfg.hbo.reevaluate:
            best_y = rec.evaluate(x_c, "hbo-outer", cats=best_c)
        outer = outer.append(x_c, best_y)
    return trace


ALGORITHMS = ("bo", "sbo", "spbo", "bo-eiig", "sbo-eiig", "hbo")


def run_algorithm(name: str, objective, space: SearchSpace, cfg: RunConfig,
                  rng=None) -> Trace:
    """Dispatch by algorithm name; the -eiig variants switch the acquisition
    to the annealed information-gain criterion."""
    if name not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; valid: {', '.join(ALGORITHMS)}")
    if name.endswith("-eiig"):
        cfg = replace(cfg, acquisition=replace(cfg.acquisition, kind="eiig"))
        base = name[:-5]
    else:
        base = name
    fn = {"bo": run_bo, "sbo": run_sbo, "spbo": run_spbo, "hbo": run_hbo}[base]
    trace = fn(objective, space, cfg, rng)
    trace.algorithm = name
    return trace
