"""Fitting one function within a tolerance.

We take sin on a full period and ask for a piecewise-affine interpolant whose
secant error stays below 0.3 on every segment. Greedy bisection finds the
fewest breakpoints; the cubic step rule is cheaper but more conservative.
"""

import math

import numpy as np

from pwabound import Interval, Method1Config, Method2Config, eval_err, parse
from pwabound import empirical_max_error, method1_breakpoints, method2_breakpoints

f = parse("sin(x)")
dom = Interval(0.0, 2 * math.pi)

# %% Greedy bisection
p1 = method1_breakpoints(f, dom, Method1Config(0.3))
print("bisection breakpoints:", np.round(p1.breakpoints, 4))
for a, b in zip(p1.breakpoints[:-1], p1.breakpoints[1:]):
    print(f"  [{a:.4f}, {b:.4f}]  secant error {eval_err(f, a, b):.4f}")

# %% Closed-form steps from a certified third-derivative bound
cfg = Method2Config.certified(f, dom, 0.3)
p2 = method2_breakpoints(f, dom, cfg)
print(f"\nstep rule uses d3 = {cfg.d3:.3f} and needs {p2.n_breakpoints} breakpoints")

# %% Both fits hold on a dense grid
for name, p in (("bisection", p1), ("step rule", p2)):
    print(f"{name:>10}: max error on 10^4 points = {empirical_max_error(p, f, 10_000):.4f}")

# %% How the count grows as the tolerance shrinks
print("\n  tau     bisection  step rule")
for tau in np.geomspace(1e-3, 1e-1, 5):
    n1 = method1_breakpoints(f, dom, Method1Config(tau)).n_breakpoints
    n2 = method2_breakpoints(f, dom, Method2Config.certified(f, dom, tau)).n_breakpoints
    print(f"  {tau:.4f}  {n1:9d}  {n2:9d}")
