"""Benchmark objectives, gap metrics, and the repeated-run harness.

Benchmarks are registered by name. Each repetition r derives its seed as
base_seed + r and every algorithm in the comparison reuses that seed, so the
initial designs coincide pointwise (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .exceptions import GroundTruthError
from .space import SearchSpace
from .strategies import RunConfig, Trace, run_algorithm

GAP_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Benchmark:
    name: str
    space: SearchSpace
    evaluator: Callable
    known_minimum: Optional[float] = None
    known_minimizer: Optional[np.ndarray] = None


def exponential_2d(x) -> float:
    """x1 * exp(-x1^2 - x2^2) on [-2, 18]^2; sharply varying near the origin
    and essentially flat elsewhere. Minimum -exp(-1/2)/sqrt(2) at
    (-1/sqrt(2), 0)."""
    x = np.asarray(x, dtype=float)
    return float(x[0] * math.exp(-x[0] ** 2 - x[1] ** 2))


# Standard 6-D Hartmann constants (literature values; validated in the test
# suite by local descent from the known minimizer).
_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
_H6_P = 1e-4 * np.array([
    [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
    [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
    [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
    [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
])
HARTMANN6_MINIMIZER = np.array([0.20169, 0.150011, 0.476874,
                                0.275332, 0.311652, 0.6573])
HARTMANN6_MINIMUM = -3.32237


def hartmann_6d(x) -> float:
    """Standard 6-D Hartmann function on [0,1]^6."""
    x = np.asarray(x, dtype=float)
    inner = np.sum(_H6_A * (x[None, :] - _H6_P) ** 2, axis=1)
    return float(-np.sum(_H6_ALPHA * np.exp(-inner)))


# d=10 reference minimum found by a multistart Nelder-Mead oracle
# (tests/test_benchmarks.py re-checks it against random sampling).
MICHALEWICZ10_MINIMUM = -9.66015


def michalewicz(x, m: int = 10) -> float:
    """-sum_i sin(x_i) sin(i x_i^2 / pi)^(2m) on [0, pi]^d; steep, narrow
    valleys whose count grows with the dimension."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    i = np.arange(1, x.shape[0] + 1)
    return float(-np.sum(np.sin(x) * np.sin(i * x ** 2 / math.pi) ** (2 * m)))


# Synthetic separable mixed-space benchmark: quadratic continuous part plus
# a per-category offset. Exercises the hierarchical loop end to end.
_MIXED_OFFSETS = (0.6, 0.0, 0.25, 0.8)


def mixed_quad4(x, cats) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float((x[0] - 0.3) ** 2 + _MIXED_OFFSETS[cats[0]])


_REGISTRY: Dict[str, Benchmark] = {}


def _register(b: Benchmark) -> Benchmark:
    _REGISTRY[b.name] = b
    return b


EXP2D = _register(Benchmark(
    name="exp2d",
    space=SearchSpace(((-2.0, 18.0), (-2.0, 18.0))),
    evaluator=exponential_2d,
    known_minimum=-math.exp(-0.5) / math.sqrt(2.0),
    known_minimizer=np.array([-1.0 / math.sqrt(2.0), 0.0]),
))

HARTMANN6 = _register(Benchmark(
    name="hartmann6",
    space=SearchSpace(tuple((0.0, 1.0) for _ in range(6))),
    evaluator=hartmann_6d,
    known_minimum=HARTMANN6_MINIMUM,
    known_minimizer=HARTMANN6_MINIMIZER,
))

MICHALEWICZ10 = _register(Benchmark(
    name="michalewicz10",
    space=SearchSpace(tuple((0.0, math.pi) for _ in range(10))),
    evaluator=michalewicz,
    known_minimum=MICHALEWICZ10_MINIMUM,
))

MIXED_QUAD4 = _register(Benchmark(
    name="mixed-quad4",
    space=SearchSpace(((0.0, 1.0),), categorical=(4,)),
    evaluator=mixed_quad4,
    known_minimum=0.0,
    known_minimizer=np.array([0.3]),
))


def get_benchmark(name: str) -> Benchmark:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; valid: {sorted(_REGISTRY)}") from None


def list_benchmarks() -> List[str]:
    return sorted(_REGISTRY)


def optimality_gap(trace: Trace, f_star: float) -> np.ndarray:
    """Per-record series best_y - f_star; non-increasing and nonnegative up
    to numerical tolerance."""
    if not math.isfinite(f_star):
        raise ValueError("f_star must be finite")
    gaps = trace.best_series() - f_star
    if np.any(gaps < -GAP_TOLERANCE):
        raise GroundTruthError(
            f"trace undercuts the registered minimum by {-float(np.min(gaps)):.3e}")
    return gaps


@dataclass
class Summary:
    """Cross-repetition aggregates of the optimality gap, per algorithm."""
    benchmark: str
    algorithms: List[str]
    medians: Dict[str, np.ndarray] = field(default_factory=dict)
    q25: Dict[str, np.ndarray] = field(default_factory=dict)
    q75: Dict[str, np.ndarray] = field(default_factory=dict)
    final_gaps: Dict[str, List[float]] = field(default_factory=dict)
    total_seconds: Dict[str, float] = field(default_factory=dict)
    failures: Dict[str, int] = field(default_factory=dict)


def run_experiment(benchmark: Benchmark, algorithms: List[str],
                   repetitions: int, cfg: RunConfig, base_seed: int = 0,
                   ) -> Tuple[Summary, Dict[Tuple[str, int], Trace]]:
    """Run every algorithm for `repetitions` common-random-number paired
    repetitions and aggregate gap statistics. A failed run is recorded as a
    failure count and excluded from the aggregates."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if benchmark.known_minimum is None:
        raise ValueError(f"benchmark {benchmark.name!r} has no reference minimum")
    traces: Dict[Tuple[str, int], Trace] = {}
    summary = Summary(benchmark=benchmark.name, algorithms=list(algorithms))
    for alg in algorithms:
        gap_rows = []
        finals: List[float] = []
        seconds = 0.0
        failures = 0
        for r in range(repetitions):
            seed = base_seed + r
            try:
                trace = run_algorithm(alg, benchmark.evaluator, benchmark.space,
                                      cfg, rng=seed)
                trace.validate()
                gaps = optimality_gap(trace, benchmark.known_minimum)
            except Exception:
                failures += 1
                continue
            traces[(alg, r)] = trace
            gap_rows.append(gaps)
            finals.append(float(gaps[-1]))
            seconds += trace.records[-1].wall_ms / 1e3
        if gap_rows:
            G = np.array(gap_rows)
            summary.medians[alg] = np.median(G, axis=0)
            summary.q25[alg] = np.quantile(G, 0.25, axis=0)
            summary.q75[alg] = np.quantile(G, 0.75, axis=0)
        summary.final_gaps[alg] = finals
        summary.total_seconds[alg] = seconds
        summary.failures[alg] = failures
    return summary, traces
