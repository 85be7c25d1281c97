"""
Hierarchical optimization over a mixed search space
===================================================

Optimizes a function of one continuous variable and one categorical
variable with four levels. The outer loop proposes continuous points with
a GP surrogate; for each of them an inner loop evaluates the categorical
choices (exhaustively here, since four fit the inner budget).
"""

import numpy as np

from spartanbo.benchmarks import get_benchmark
from spartanbo.strategies import HboConfig, RunConfig, run_hbo

bench = get_benchmark("mixed-quad4")
print(f"benchmark: {bench.name}; minimum 0 at x = 0.3, category 1")

cfg = RunConfig(n_init=6, m=5, burn_in=50, seed=0,
                hbo=HboConfig(N_c=8, N_d=4))
print(f"== running hbo: {cfg.hbo.N_c} outer steps x {cfg.hbo.N_d} "
      f"inner evaluations ==")
trace = run_hbo(bench.evaluator, bench.space, cfg)

print("== best-so-far after each outer step ==")
inner = [r for r in trace.records if r.phase == "hbo-inner"]
best = min(trace.records[:cfg.n_init], key=lambda r: r.y)
for step in range(cfg.hbo.N_c):
    block = inner[cfg.hbo.N_d * step:cfg.hbo.N_d * (step + 1)]
    best = min([best] + block, key=lambda r: r.y)
    print(f"   step {step + 1}: x = {best.x[0]:.4f}, cat = {best.cats[0]}, "
          f"y = {best.y:.5f}")

winner = min(trace.records, key=lambda r: r.y)
print(f"== result: x = {winner.x[0]:.4f}, category {winner.cats[0]}, "
      f"y = {winner.y:.5f} ==")
