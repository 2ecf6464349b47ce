"""Piecewise-affine approximation with certified error bounds."""

from .alloc import AllocationResult, Staircase, build_staircase, solve_p1, solve_p2
from .approx import (
    Method1Config,
    Method2Config,
    eval_err,
    method1_breakpoints,
    method2_breakpoints,
    theorem1_bound,
)
from .chain import (
    DecompGraph,
    DecompNode,
    decompose,
    eval_composed,
    fit_tolerances,
    propagate_domains,
    propagate_error,
    sensitivity,
)
from .expr import Expr, differentiate, eval_interval, eval_point, parse, simplify
from .interval import Interval
from .pwa import PwaFunction1D, empirical_max_error

__all__ = [
    "AllocationResult",
    "DecompGraph",
    "DecompNode",
    "Expr",
    "Interval",
    "Method1Config",
    "Method2Config",
    "PwaFunction1D",
    "Staircase",
    "build_staircase",
    "decompose",
    "differentiate",
    "empirical_max_error",
    "eval_composed",
    "eval_err",
    "eval_interval",
    "eval_point",
    "fit_tolerances",
    "method1_breakpoints",
    "method2_breakpoints",
    "parse",
    "propagate_domains",
    "propagate_error",
    "sensitivity",
    "simplify",
    "solve_p1",
    "solve_p2",
    "theorem1_bound",
]
