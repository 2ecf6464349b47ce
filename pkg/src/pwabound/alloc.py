"""Tolerance versus breakpoint trade-offs and budget allocation across a chain.

A :class:`Staircase` lists, for one unary node, the tolerances at which the
number of breakpoints a method needs changes.  Given staircases for every
unary node, :func:`solve_p2` picks one candidate per node minimising the
sensitivity-weighted tolerance sum under a total breakpoint budget (an exact
multi-choice knapsack dynamic program), and :func:`solve_p1` finds the
smallest budget that meets a target bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import chain
from .approx import Method1Config, Method2Config, method1_breakpoints, method2_breakpoints
from .expr import Expr
from .interval import Interval


class AllocError(ValueError):
    pass


class InfeasibleBudget(AllocError):
    def __init__(self, msg, minimum: int):
        super().__init__(msg)
        self.minimum = minimum


class InfeasibleTolerance(AllocError):
    def __init__(self, msg, minimum: float):
        super().__init__(msg)
        self.minimum = minimum


@dataclass(frozen=True)
class Staircase:
    """Frontier of ``(tau, n)`` pairs: tau strictly increasing, n strictly decreasing."""

    taus: tuple
    counts: tuple
    node_id: int | None = None

    def __post_init__(self):
        taus = tuple(float(t) for t in self.taus)
        counts = tuple(int(n) for n in self.counts)
        if not taus or len(taus) != len(counts):
            raise AllocError("a staircase needs at least one (tau, n) pair")
        if any(t <= 0 or not math.isfinite(t) for t in taus):
            raise AllocError("staircase tolerances must be positive and finite")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise AllocError("staircase tolerances must be strictly increasing")
        if any(b >= a for a, b in zip(counts, counts[1:])):
            raise AllocError("staircase counts must be strictly decreasing")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_samples(cls, pairs, node_id: int | None = None) -> "Staircase":
        """Prune raw ``(tau, n)`` samples to the frontier.

        Keeps the pairs no other sample beats on both tolerance and count, so
        each count retains its smallest tolerance.
        """
        taus: list[float] = []
        counts: list[int] = []
        for tau, n in sorted((float(t), int(n)) for t, n in pairs):
            if not counts or n < counts[-1]:
                taus.append(tau)
                counts.append(n)
        return cls(tuple(taus), tuple(counts), node_id)

    @property
    def candidates(self) -> list:
        return list(zip(self.taus, self.counts))

    @property
    def min_count(self) -> int:
        return self.counts[-1]

    def __len__(self):
        return len(self.taus)

    def breakpoints_for(self, tau: float) -> int | None:
        """Fewest breakpoints among candidates whose tolerance is at most ``tau``."""
        i = int(np.searchsorted(self.taus, tau, side="right")) - 1
        return None if i < 0 else self.counts[i]

    def to_dict(self) -> dict:
        return {"node_id": self.node_id, "taus": list(self.taus), "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, d: dict) -> "Staircase":
        return cls(tuple(d["taus"]), tuple(d["counts"]), d.get("node_id"))


def _fit_count(f: Expr, domain: Interval, tau: float, method: str) -> int:
    if method == "method1":
        return method1_breakpoints(f, domain, Method1Config(tau)).n_breakpoints
    if method == "method2":
        return method2_breakpoints(f, domain, Method2Config.certified(f, domain, tau)).n_breakpoints
    raise AllocError(f"unknown method {method!r}")


def staircase_samples(
    f: Expr,
    domain: Interval,
    tau_lo: float,
    tau_hi: float,
    samples: int = 500,
    method: str = "method1",
    max_breakpoints: int | None = None,
) -> list:
    """Raw ``(tau, n)`` pairs at log-spaced tolerances, largest tolerance first.

    With ``max_breakpoints`` the sweep stops at the first tolerance needing
    more; counts only grow as the tolerance shrinks, so nothing usable is lost.
    The coarsest sample is always kept so an infeasible cap still reports the
    true minimal count downstream.
    """
    if not (0 < tau_lo < tau_hi):
        raise AllocError(f"need 0 < tau_lo < tau_hi, got {tau_lo}, {tau_hi}")
    if samples < 2:
        raise AllocError("samples must be at least 2")
    out = []
    for tau in np.geomspace(tau_lo, tau_hi, samples)[::-1]:
        n = _fit_count(f, domain, float(tau), method)
        if max_breakpoints is not None and n > max_breakpoints and out:
            break
        out.append((float(tau), n))
    return out


def build_staircase(
    f: Expr,
    domain: Interval,
    tau_lo: float,
    tau_hi: float,
    samples: int = 500,
    method: str = "method1",
    max_breakpoints: int | None = None,
    node_id: int | None = None,
) -> Staircase:
    pairs = staircase_samples(f, domain, tau_lo, tau_hi, samples, method, max_breakpoints)
    return Staircase.from_samples(pairs, node_id)


def graph_staircases(
    g: chain.DecompGraph,
    tau_range: tuple,
    samples: int = 500,
    method: str = "method1",
    budget: int | None = None,
) -> dict:
    """Staircase for every unary node over its input domain at the largest tolerance.

    With a budget, each sweep stops once a node alone would need more
    breakpoints than the budget leaves after giving every other node two.
    Nodes sharing a function and domain share one staircase.
    """
    lo, hi = tau_range
    worst = chain.assign_tolerances(g, chain.uniform_taus(g, hi))
    nodes = worst.unary_nodes()
    cap = None if budget is None else budget - 2 * (len(nodes) - 1)
    memo: dict = {}
    out = {}
    for n in nodes:
        key = (n.fn, n.input_domain)
        if key not in memo:
            memo[key] = build_staircase(n.fn, n.input_domain, lo, hi, samples, method, cap)
        st = memo[key]
        out[n.id] = Staircase(st.taus, st.counts, n.id)
    return out


@dataclass
class AllocationResult:
    mode: str
    taus: dict
    counts: dict
    coefficients: dict
    total_breakpoints: int = field(init=False)
    composed_bound: float = field(init=False)

    def __post_init__(self):
        self.total_breakpoints = int(sum(self.counts.values()))
        self.composed_bound = float(sum(self.coefficients[i] * t for i, t in self.taus.items()))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "total_breakpoints": self.total_breakpoints,
            "composed_bound": self.composed_bound,
            "nodes": [
                {"id": i, "tau": self.taus[i], "n_breakpoints": self.counts[i], "coefficient": self.coefficients[i]}
                for i in sorted(self.taus)
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def frozen_coefficients(g: chain.DecompGraph, staircases: Mapping[int, Staircase]) -> dict:
    """Sensitivity coefficients valid for every candidate selection.

    Derivative bounds are taken with each node at its largest candidate
    tolerance, which gives the widest inflated domains.
    """
    _check_cover(g, staircases)
    worst = chain.assign_tolerances(g, {i: s.taus[-1] for i, s in staircases.items()})
    coeffs = chain.sensitivity(worst)
    return {n.id: coeffs[n.id] for n in g.unary_nodes()}


def _check_cover(g, staircases):
    missing = [n.id for n in g.unary_nodes() if n.id not in staircases]
    if missing:
        raise AllocError(f"no staircase for unary nodes {missing}")


def _knapsack(items: list, weights: list, N: int):
    """Multi-choice knapsack: one candidate per item, total count at most ``N``.

    ``items[k]`` is a list of ``(tau, n)``.  Minimises the weighted tau sum,
    breaking ties on the plain tau sum.  Returns chosen indices or None.
    """
    INF = (math.inf, math.inf)
    # best[b] = (cost, tau_sum, choices) using exactly b breakpoints
    best: list = [INF] * (N + 1)
    choice: list = [None] * (N + 1)
    best[0] = (0.0, 0.0)
    choice[0] = ()
    for cands, w in zip(items, weights):
        nxt: list = [INF] * (N + 1)
        nchoice: list = [None] * (N + 1)
        for b in range(N + 1):
            if choice[b] is None:
                continue
            cost, tsum = best[b]
            for j, (tau, n) in enumerate(cands):
                nb = b + n
                if nb > N:
                    continue
                key = (cost + w * tau, tsum + tau)
                if key < nxt[nb]:
                    nxt[nb] = key
                    nchoice[nb] = choice[b] + (j,)
        best, choice = nxt, nchoice
    top = None
    for b in range(N + 1):
        if choice[b] is not None and (top is None or best[b] < best[top]):
            top = b
    return None if top is None else choice[top]


def solve_p2(
    g: chain.DecompGraph,
    staircases: Mapping[int, Staircase],
    N: int,
    coefficients: Mapping[int, float] | None = None,
) -> AllocationResult:
    """Minimise the composed bound subject to at most ``N`` breakpoints in total."""
    coeffs = dict(coefficients) if coefficients is not None else frozen_coefficients(g, staircases)
    ids = [n.id for n in g.unary_nodes()]
    _check_cover(g, staircases)
    minimum = sum(staircases[i].min_count for i in ids)
    if N < minimum:
        raise InfeasibleBudget(f"budget {N} is below the minimal total {minimum}", minimum)
    picks = _knapsack([staircases[i].candidates for i in ids], [coeffs[i] for i in ids], int(N))
    taus = {i: staircases[i].taus[j] for i, j in zip(ids, picks)}
    counts = {i: staircases[i].counts[j] for i, j in zip(ids, picks)}
    return AllocationResult("P2", taus, counts, {i: coeffs[i] for i in ids})


def solve_p1(
    g: chain.DecompGraph,
    staircases: Mapping[int, Staircase],
    T: float,
    coefficients: Mapping[int, float] | None = None,
) -> AllocationResult:
    """Fewest total breakpoints whose composed bound is at most ``T``."""
    if not T > 0:
        raise AllocError(f"target bound must be positive, got {T}")
    coeffs = dict(coefficients) if coefficients is not None else frozen_coefficients(g, staircases)
    ids = [n.id for n in g.unary_nodes()]
    _check_cover(g, staircases)
    lo = sum(staircases[i].min_count for i in ids)
    hi = sum(max(staircases[i].counts) for i in ids)
    finest = solve_p2(g, staircases, hi, coeffs)
    if finest.composed_bound > T:
        raise InfeasibleTolerance(
            f"finest candidates give bound {finest.composed_bound:.6g} > {T}", finest.composed_bound
        )
    while lo < hi:
        mid = (lo + hi) // 2
        if solve_p2(g, staircases, mid, coeffs).composed_bound <= T:
            hi = mid
        else:
            lo = mid + 1
    res = solve_p2(g, staircases, lo, coeffs)
    res.mode = "P1"
    return res


def uniform_counts(g: chain.DecompGraph, N: int) -> dict:
    """Split ``N`` breakpoints evenly over the unary nodes, remainder to the first ones."""
    ids = [n.id for n in g.unary_nodes()]
    q, r = divmod(int(N), len(ids))
    if q < 2:
        raise InfeasibleBudget(f"budget {N} leaves fewer than 2 breakpoints per node", 2 * len(ids))
    return {i: q + (1 if k < r else 0) for k, i in enumerate(ids)}
