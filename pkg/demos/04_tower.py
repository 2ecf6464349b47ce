"""The tower benchmark: a sum of inverse distances in the plane.

Four reciprocals of squared distances give a function with twelve
one-dimensional stages. Staircase sweeps dominate the runtime (about a
minute); the allocation itself is a fraction of a second.
"""

import time

import numpy as np

from pwabound import alloc, bench, chain

f, box = bench.tower()
g = chain.decompose(f, box, inflate=bench.TOWER_INFLATE)
print(bench.tower_text())
print(f"{len(g.nodes)} nodes: {g.count('reciprocal')} reciprocals, {g.count('square')} squares")

# %% Staircases, then P2 at the benchmark budget
t0 = time.perf_counter()
stairs = alloc.graph_staircases(g, bench.TOWER_TAU_RANGE, 500, "method1", bench.TOWER_BUDGET)
print(f"staircases: {time.perf_counter() - t0:.1f} s")
res = alloc.solve_p2(g, stairs, bench.TOWER_BUDGET)
print(f"allocated {res.total_breakpoints} breakpoints, bound {res.composed_bound:.4f}")

# %% Allocated fit against a uniform split of the same budget
x = np.linspace(-5.0, 5.0, 201)
grid = dict(zip(("x1", "x2"), np.meshgrid(x, x, indexing="ij")))
for name, fitted in (
    ("allocated", chain.fit_tolerances(g, res.taus)),
    ("uniform", chain.fit_uniform(g, alloc.uniform_counts(g, bench.TOWER_BUDGET))),
):
    exact, approx = chain.eval_composed(fitted, grid)
    print(f"{name:>9}: observed max error {np.max(np.abs(approx - exact)):.4f}")
