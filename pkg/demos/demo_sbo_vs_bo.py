"""
SBO versus plain BO on a nonstationary objective
================================================

Runs both optimizers with shared initial designs on the exponential-2D
benchmark: a function that is numerically zero on most of [-2, 18]^2 and
dips to its minimum inside a tiny region near the origin. The stationary
surrogate tends to smooth the dip away; the composite-kernel surrogate
learns a short lengthscale there and keeps probing small unexplored
regions.

Three paired repetitions at the full budget take several minutes. Neither
method wins every seed on this needle-in-a-haystack problem; the expected
picture is SBO closing the gap earlier and on more repetitions.
"""

import numpy as np

from spartanbo.benchmarks import get_benchmark, optimality_gap, run_experiment
from spartanbo.strategies import RunConfig

bench = get_benchmark("exp2d")
print(f"benchmark: {bench.name}, minimum {bench.known_minimum:.6f} "
      f"at {bench.known_minimizer}")

cfg = RunConfig(n_init=10, n_iter=40)
reps = 3
print(f"== running {reps} paired repetitions of bo and sbo "
      f"(several minutes) ==")
summary, traces = run_experiment(bench, ["bo", "sbo"], reps, cfg, base_seed=0)

print("== median optimality gap by evaluation ==")
print("   eval      bo          sbo")
for i in range(9, cfg.n_init + cfg.n_iter, 5):
    print(f"   {i + 1:4d}  {summary.medians['bo'][i]:.3e}  "
          f"{summary.medians['sbo'][i]:.3e}")

print("== per-repetition final gaps ==")
for r in range(reps):
    gb = optimality_gap(traces[('bo', r)], bench.known_minimum)[-1]
    gs = optimality_gap(traces[('sbo', r)], bench.known_minimum)[-1]
    tag = "sbo" if gs <= gb else "bo"
    print(f"   rep {r}: bo {gb:.3e}  sbo {gs:.3e}  ({tag} wins)")
