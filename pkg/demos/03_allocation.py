"""Spending a breakpoint budget where it matters.

Each stage of a composition has a staircase: the tolerances it can reach and
the breakpoints each one costs. A knapsack over those staircases picks the
tolerances that minimise the output bound under a total budget (P2), or the
cheapest tolerances that meet a target bound (P1).
"""

import numpy as np

from pwabound import Interval, decompose, eval_composed, fit_tolerances, parse, solve_p1, solve_p2
from pwabound import alloc, chain

f = parse("(sin(1/x))^2")
box = {"x": Interval(1.0, 3.0)}
g = decompose(f, box)

# %% Staircases over each stage's widest input domain
stairs = alloc.graph_staircases(g, (1e-3, 0.1), samples=60)
for nid, s in stairs.items():
    print(f"node {nid}: {len(s)} steps, from {s.counts[0]} breakpoints at tau={s.taus[0]:.4f}"
          f" down to {s.counts[-1]} at tau={s.taus[-1]:.4f}")

x = np.linspace(1.0, 3.0, 10_001)


def observed(res):
    exact, approx = eval_composed(fit_tolerances(g, res.taus), {"x": x})
    return np.max(np.abs(approx - exact))


# %% Best bound for a few budgets
print("\nbudget  bound    observed  uniform observed")
for N in (10, 20, 40):
    res = solve_p2(g, stairs, N)
    uniform = chain.fit_uniform(g, alloc.uniform_counts(g, N))
    exact, approx = eval_composed(uniform, {"x": x})
    print(f"{N:6d}  {res.composed_bound:.5f}  {observed(res):.5f}   {np.max(np.abs(approx - exact)):.5f}")

# %% Fewest breakpoints for a target
res = solve_p1(g, stairs, 0.02)
print(f"\nbound 0.02 needs {res.total_breakpoints} breakpoints:", res.counts)
