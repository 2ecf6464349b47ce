"""Functional decomposition into affine and unary nodes, with error propagation.

A :class:`DecompGraph` is a topologically ordered list of nodes:

* ``input``: a free variable of the original expression
* ``affine``: ``offset + sum(c_i * parent_i)``, represented exactly
* ``unary``: ``fn(parent)`` where ``fn`` is an expression in :data:`U`

Each unary node gets a tolerance ``tau`` and a secant (SOS) fit.  The error
bound at every node is propagated in topological order as
``eps = tau + d * eps_parent`` for unary nodes and ``eps = sum |c_i| eps_i``
for affine ones, where the slope factor ``d`` is

* ``affine_thm2``: the slope magnitude of the single secant over the node's
  input domain,
* ``pwa_cor1``: the largest segment slope magnitude of the fitted PWA,
* ``secant_cor3``: ``max |fn'|`` over the node's input domain, certified by
  interval arithmetic.

Every node's ``inflated_domain`` is its range widened by its
``secant_cor3`` error; approximate values always stay inside it.  With
``inflate=True`` (the default) each unary node is fitted over its parent's
inflated domain, so perturbed inputs stay inside the fitted domain.  With
``inflate=False`` nodes are fitted over exact ranges and approximate inputs are
clamped into them; clamping onto an interval that contains the exact value
never increases the input error, so all three bounds stay valid.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import interval as iv
from .approx import (
    Method1Config,
    Method2Config,
    _Evaluator,
    _secant_error,
    method1_breakpoints,
    method2_breakpoints,
    secant,
    uniform_breakpoints,
)
from .expr import Expr, UnboundVariable, differentiate, eval_interval, eval_point, lambdify, parse, to_string, var
from .interval import Interval
from .pwa import OutOfDomain, PwaFunction1D

U = "u"
_u = var(U)

MODES = ("affine_thm2", "pwa_cor1", "secant_cor3")
FIT_METHODS = ("method1", "method2", "secant")


class ChainError(ValueError):
    pass


class UnsupportedNode(ChainError):
    pass


class MissingFit(ChainError):
    pass


class MissingBounds(ChainError):
    pass


class NotSOS(ChainError):
    pass


@dataclass
class DecompNode:
    id: int
    kind: str
    parents: tuple = ()
    var: str | None = None
    coeffs: tuple = ()
    offset: float = 0.0
    fn: Expr | None = None
    domain: Interval | None = None
    inflated_domain: Interval | None = None
    input_domain: Interval | None = None
    tau: float = 0.0
    eps: float = 0.0
    d_bound: float | None = None
    d_pwa: float | None = None
    pwa: PwaFunction1D | None = field(default=None, repr=False)

    @property
    def label(self) -> str:
        """Short description of the node function (``square``, ``reciprocal``, ...)."""
        if self.kind != "unary":
            return self.kind
        f = self.fn
        if f.kind == "powi" and f.args[0] == _u:
            if f.value == 2:
                return "square"
            if f.value == -1:
                return "reciprocal"
            return f"power{f.value}"
        if f.kind == "div" and f.args[1] == _u and f.args[0].kind == "const":
            return "reciprocal"
        if f.args and f.args[0] == _u:
            return f.kind
        return to_string(f)


@dataclass
class DecompGraph:
    nodes: list
    output: int
    box: dict
    inflate: bool = True

    def __getitem__(self, i: int) -> DecompNode:
        return self.nodes[i]

    def __len__(self):
        return len(self.nodes)

    def unary_nodes(self) -> list:
        return [n for n in self.nodes if n.kind == "unary"]

    def count(self, label: str) -> int:
        return sum(1 for n in self.nodes if n.label == label)

    def copy(self) -> "DecompGraph":
        return DecompGraph([copy.copy(n) for n in self.nodes], self.output, dict(self.box), self.inflate)

    def to_dict(self) -> dict:
        return {
            "output": self.output,
            "inflate": self.inflate,
            "box": {k: [v.lo, v.hi] for k, v in self.box.items()},
            "nodes": [_node_dict(n) for n in self.nodes],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "DecompGraph":
        nodes = []
        for nd in d["nodes"]:
            nodes.append(
                DecompNode(
                    id=nd["id"],
                    kind=nd["kind"],
                    parents=tuple(nd["parents"]),
                    var=nd.get("var"),
                    coeffs=tuple(nd.get("coefficients", ())),
                    offset=nd.get("offset", 0.0),
                    fn=parse(nd["fn"]) if nd.get("fn") else None,
                    domain=_iv(nd.get("domain")),
                    inflated_domain=_iv(nd.get("inflated_domain")),
                    input_domain=_iv(nd.get("input_domain")),
                    tau=nd.get("tau", 0.0),
                    eps=nd.get("eps", 0.0),
                    d_bound=nd.get("d_bound"),
                    d_pwa=nd.get("d_pwa"),
                    pwa=PwaFunction1D.from_dict(nd["pwa"]) if nd.get("pwa") else None,
                )
            )
        box = {k: Interval(*v) for k, v in d["box"].items()}
        return cls(nodes, d["output"], box, d.get("inflate", True))

    @classmethod
    def from_json(cls, text: str) -> "DecompGraph":
        return cls.from_dict(json.loads(text))


def _iv(v):
    return None if v is None else Interval(*v)


def _node_dict(n: DecompNode) -> dict:
    d = {"id": n.id, "kind": n.kind, "label": n.label, "parents": list(n.parents)}
    if n.kind == "input":
        d["var"] = n.var
    if n.kind == "affine":
        d["coefficients"] = list(n.coeffs)
        d["offset"] = n.offset
    if n.kind == "unary":
        d["fn"] = to_string(n.fn)
    for key in ("domain", "inflated_domain", "input_domain"):
        v = getattr(n, key)
        d[key] = None if v is None else [v.lo, v.hi]
    d.update(tau=n.tau, eps=n.eps, d_bound=n.d_bound, d_pwa=n.d_pwa)
    d["pwa"] = n.pwa.to_dict() if n.pwa is not None else None
    return d


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

class _Builder:
    """Rewrites an expression into linear forms over input and unary nodes."""

    def __init__(self):
        self.nodes: list[DecompNode] = []
        self.inputs: dict[str, int] = {}
        self.affine_memo: dict = {}
        self.unary_memo: dict = {}
        self.memo: dict = {}

    # a linear form is (terms: dict id -> coeff, offset)
    def lin(self, e: Expr):
        if e in self.memo:
            return self.memo[e]
        out = self._lin(e)
        self.memo[e] = out
        return out

    def _lin(self, e: Expr):
        k = e.kind
        if k == "const":
            return {}, e.value
        if k == "var":
            if e.value not in self.inputs:
                i = self._add(DecompNode(len(self.nodes), "input", var=e.value))
                self.inputs[e.value] = i
            return {self.inputs[e.value]: 1.0}, 0.0
        if k == "add":
            return _combine(self.lin(e.args[0]), 1.0, self.lin(e.args[1]), 1.0)
        if k == "sub":
            return _combine(self.lin(e.args[0]), 1.0, self.lin(e.args[1]), -1.0)
        if k == "neg":
            return _scale(self.lin(e.args[0]), -1.0)
        if k == "mul":
            return self.product(self.lin(e.args[0]), self.lin(e.args[1]))
        if k == "div":
            p, q = self.lin(e.args[0]), self.lin(e.args[1])
            if not q[0]:
                if q[1] == 0.0:
                    raise UnsupportedNode(f"division by the constant zero in {e}")
                return _scale(p, 1.0 / q[1])
            return self.product(p, self.unary(const_recip(), q))
        if k == "powi":
            p = self.lin(e.args[0])
            if e.value == 1:
                return p
            return self.unary(_u ** e.value, p)
        if k in ("sin", "cos", "sqrt", "exp", "log", "abs"):
            return self.unary(Expr(k, (_u,)), self.lin(e.args[0]))
        raise UnsupportedNode(f"cannot decompose node kind {k!r}")

    def product(self, p, q):
        if not p[0]:
            return _scale(q, p[1])
        if not q[0]:
            return _scale(p, q[1])
        s = self.unary(_u**2, _combine(p, 1.0, q, 1.0))
        d = self.unary(_u**2, _combine(p, 1.0, q, -1.0))
        return _combine(s, 0.25, d, -0.25)

    def unary(self, fn: Expr, p):
        if not p[0]:
            return {}, eval_point(fn, {U: p[1]})
        parent = self.materialize(p)
        key = (fn, parent)
        if key not in self.unary_memo:
            self.unary_memo[key] = self._add(DecompNode(len(self.nodes), "unary", parents=(parent,), fn=fn))
        return {self.unary_memo[key]: 1.0}, 0.0

    def materialize(self, p) -> int:
        terms, offset = p
        if len(terms) == 1 and offset == 0.0:
            ((i, c),) = terms.items()
            if c == 1.0:
                return i
        items = tuple(sorted(terms.items()))
        key = (items, offset)
        if key not in self.affine_memo:
            node = DecompNode(
                len(self.nodes),
                "affine",
                parents=tuple(i for i, _ in items),
                coeffs=tuple(c for _, c in items),
                offset=offset,
            )
            self.affine_memo[key] = self._add(node)
        return self.affine_memo[key]

    def _add(self, node: DecompNode) -> int:
        self.nodes.append(node)
        return node.id


def const_recip() -> Expr:
    return Expr("div", (Expr("const", (), 1.0), _u))


def _combine(p, a, q, b):
    terms = {i: a * c for i, c in p[0].items()}
    for i, c in q[0].items():
        terms[i] = terms.get(i, 0.0) + b * c
    return {i: c for i, c in terms.items() if c != 0.0}, a * p[1] + b * q[1]


def _scale(p, c):
    if c == 0.0:
        return {}, 0.0
    return {i: c * v for i, v in p[0].items()}, c * p[1]


def decompose(e: Expr, input_box: Mapping[str, Interval], inflate: bool = True) -> DecompGraph:
    """Rewrite ``e`` as a DAG of input, affine and unary nodes and bound every range.

    Sums, differences, negation and constant scaling fold into affine nodes;
    ``p*q`` becomes ``((p+q)^2 - (p-q)^2) / 4`` and ``p/q`` becomes
    ``p * (1/q)``, so every nonlinearity is a unary node.
    """
    missing = sorted(e.variables() - set(input_box))
    if missing:
        raise UnboundVariable(f"no box given for {missing}")
    b = _Builder()
    for name in sorted(e.variables()):
        b.lin(var(name))
    form = b.lin(e)
    out = b.materialize(form)
    g = DecompGraph(b.nodes, out, {k: input_box[k] for k in sorted(e.variables())}, inflate)
    return propagate_domains(g)


def propagate_domains(g: DecompGraph) -> DecompGraph:
    """Interval enclosure of every node's exact range, in topological order."""
    g = g.copy()
    for n in g.nodes:
        if n.kind == "input":
            n.domain = g.box[n.var]
        elif n.kind == "affine":
            dom = Interval.point(n.offset)
            for p, c in zip(n.parents, n.coeffs):
                dom = iv.add(dom, iv.scale(g[p].domain, c))
            n.domain = dom
        else:
            n.domain = eval_interval(n.fn, {U: g[n.parents[0]].domain})
        if n.inflated_domain is None:
            n.inflated_domain = n.domain
    return g


# ---------------------------------------------------------------------------
# tolerances, bounds and fits
# ---------------------------------------------------------------------------

def derivative_bound(fn: Expr, domain: Interval) -> float:
    """Certified ``max |fn'|`` over ``domain``."""
    if fn == Expr("abs", (_u,)):
        return 1.0
    return eval_interval(differentiate(fn, U), {U: domain}).mag


def assign_tolerances(g: DecompGraph, taus: Mapping[int, float]) -> DecompGraph:
    """Set tolerances and compute input domains, derivative bounds and ``eps``.

    ``eps`` is the ``secant_cor3`` bound; it drives domain inflation.
    """
    g = g.copy()
    for n in g.nodes:
        if n.kind == "input":
            n.tau, n.eps = 0.0, 0.0
        elif n.kind == "affine":
            n.tau = 0.0
            n.eps = sum(abs(c) * g[p].eps for p, c in zip(n.parents, n.coeffs))
        else:
            if n.id not in taus:
                raise ChainError(f"no tolerance given for unary node {n.id} ({n.label})")
            tau = float(taus[n.id])
            if tau < 0 or not math.isfinite(tau):
                raise ChainError(f"invalid tolerance {tau} for node {n.id}")
            parent = g[n.parents[0]]
            n.tau = tau
            n.input_domain = parent.inflated_domain if g.inflate else parent.domain
            n.d_bound = derivative_bound(n.fn, n.input_domain)
            n.eps = tau + n.d_bound * parent.eps
            if n.pwa is not None and n.pwa.domain != n.input_domain:
                n.pwa, n.d_pwa = None, None
        n.inflated_domain = iv.inflate(n.domain, n.eps)
    return g


def uniform_taus(g: DecompGraph, tau: float) -> dict:
    return {n.id: tau for n in g.unary_nodes()}


def fit_tolerances(
    g: DecompGraph,
    taus: Mapping[int, float],
    method: str = "method1",
    method1: Method1Config | None = None,
) -> DecompGraph:
    """Fit every unary node at its tolerance over its input domain.

    ``method="secant"`` uses the single secant for nodes whose input carries
    error and Method 1 for nodes fed by exact values; a secant node's ``tau``
    is raised to its measured secant error if the given value is smaller.
    """
    if method not in FIT_METHODS:
        raise ChainError(f"unknown fit method {method!r}")
    g = assign_tolerances(g, taus)
    if method == "secant":
        for i in [n.id for n in g.unary_nodes()]:
            n = g[i]
            if g[n.parents[0]].eps > 0.0:
                dom = n.input_domain
                err = _secant_error(_Evaluator(n.fn), dom.lo, dom.hi, 1024, 1e-10)
                if err > n.tau:
                    # raising one tau widens downstream domains, so recompute
                    taus = {m.id: m.tau for m in g.unary_nodes()}
                    taus[i] = err
                    g = assign_tolerances(g, taus)
    for n in g.unary_nodes():
        dom = n.input_domain
        if method == "secant" and g[n.parents[0]].eps > 0.0:
            pwa = secant(n.fn, dom)
        elif n.tau <= 0.0:
            raise ChainError(f"cannot fit node {n.id} at zero tolerance")
        elif method == "method2":
            pwa = method2_breakpoints(n.fn, dom, Method2Config.certified(n.fn, dom, n.tau))
        else:
            cfg = method1 or Method1Config(n.tau)
            if cfg.tolerance != n.tau:
                cfg = Method1Config(n.tau, cfg.breakpoint_tolerance, cfg.eval_err_samples, cfg.refine_tol)
            pwa = method1_breakpoints(n.fn, dom, cfg)
        n.pwa = pwa
        n.d_pwa = pwa.max_abs_slope()
    return g


def fit_uniform(g: DecompGraph, counts: Mapping[int, int], taus: Mapping[int, float] | None = None) -> DecompGraph:
    """Fit unary nodes on uniform grids with ``counts[id]`` breakpoints.

    Each node's tolerance is its measured maximum segment error unless given.
    Tolerances are measured in topological order because each node's input
    domain depends on upstream errors.
    """
    g = g.copy()
    measured = {}
    for n in g.unary_nodes():
        g = assign_tolerances(g, {**measured, **{m.id: 0.0 for m in g.unary_nodes() if m.id not in measured}})
        node = g[n.id]
        pwa = uniform_breakpoints(node.fn, node.input_domain, counts[n.id])
        if taus is not None and n.id in taus:
            measured[n.id] = float(taus[n.id])
        else:
            fe = _Evaluator(node.fn)
            bp = pwa.breakpoints
            measured[n.id] = max(_secant_error(fe, a, b, 1024, 1e-10) for a, b in zip(bp[:-1], bp[1:]))
    g = assign_tolerances(g, measured)
    for n in g.unary_nodes():
        n.pwa = uniform_breakpoints(n.fn, n.input_domain, counts[n.id])
        n.d_pwa = n.pwa.max_abs_slope()
    return g


def _secant_slope(fn: Expr, dom: Interval) -> float:
    f = lambdify(fn, U)
    ya, yb = f(np.array([dom.lo, dom.hi]))
    return float(abs((yb - ya) / (dom.hi - dom.lo)))


def propagate_error(g: DecompGraph, mode: str = "secant_cor3") -> dict:
    """Per-node error bounds ``eps`` for the given propagation mode."""
    if mode not in MODES:
        raise ChainError(f"unknown mode {mode!r}; expected one of {MODES}")
    eps: dict[int, float] = {}
    for n in g.nodes:
        if n.kind == "input":
            eps[n.id] = 0.0
        elif n.kind == "affine":
            eps[n.id] = float(sum(abs(c) * eps[p] for p, c in zip(n.parents, n.coeffs)))
        else:
            if n.input_domain is None:
                raise MissingBounds(f"node {n.id} has no tolerance assigned")
            if mode == "affine_thm2":
                d = _secant_slope(n.fn, n.input_domain)
            elif mode == "pwa_cor1":
                if n.pwa is None:
                    raise MissingFit(f"node {n.id} ({n.label}) has no PWA fit")
                d = n.d_pwa
            else:
                if n.d_bound is None:
                    raise MissingBounds(f"node {n.id} has no derivative bound")
                if n.pwa is not None and not n.pwa.is_sos(n.fn, rtol=1e-9, atol=1e-12):
                    raise NotSOS(f"fit of node {n.id} does not interpolate its function")
                d = n.d_bound
            eps[n.id] = float(n.tau + d * eps[n.parents[0]])
    return eps


def sensitivity(g: DecompGraph) -> dict:
    """Coefficient of each node's ``tau`` in the output's ``secant_cor3`` bound.

    Sums, over every path to the output, the products of downstream derivative
    bounds and affine coefficient magnitudes.
    """
    coeff = {n.id: 0.0 for n in g.nodes}
    coeff[g.output] = 1.0
    for n in reversed(g.nodes):
        c = coeff[n.id]
        if n.kind == "affine":
            for p, a in zip(n.parents, n.coeffs):
                coeff[p] += c * abs(a)
        elif n.kind == "unary":
            if n.d_bound is None:
                raise MissingBounds(f"node {n.id} has no derivative bound")
            coeff[n.parents[0]] += c * n.d_bound
    return coeff


def output_bound(g: DecompGraph, coeffs: Mapping[int, float] | None = None) -> float:
    coeffs = sensitivity(g) if coeffs is None else coeffs
    return sum(coeffs[n.id] * n.tau for n in g.unary_nodes())


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def eval_exact(g: DecompGraph, point: Mapping[str, float]):
    """Values of every node under exact node functions (arrays broadcast)."""
    vals = {}
    for n in g.nodes:
        if n.kind == "input":
            vals[n.id] = np.asarray(point[n.var], dtype=float)
        elif n.kind == "affine":
            v = n.offset
            for p, c in zip(n.parents, n.coeffs):
                v = v + c * vals[p]
            vals[n.id] = np.asarray(v, dtype=float)
        else:
            vals[n.id] = lambdify(n.fn, U)(vals[n.parents[0]])
    return vals


def eval_composed(g: DecompGraph, point: Mapping[str, float], check: bool = True):
    """``(exact, approx)`` output values at ``point`` (scalars or arrays).

    Approximate unary inputs are clamped into the fitted domain.  Values that
    fall outside the parent's range widened by its error bound indicate a
    broken invariant and raise :class:`OutOfDomain`.
    """
    for name, box in g.box.items():
        x = np.asarray(point[name], dtype=float)
        if np.any(x < box.lo) or np.any(x > box.hi):
            raise OutOfDomain(f"{name} outside its box {box}")
    exact = eval_exact(g, point)
    approx = {}
    for n in g.nodes:
        if n.kind == "input":
            approx[n.id] = exact[n.id]
        elif n.kind == "affine":
            v = n.offset
            for p, c in zip(n.parents, n.coeffs):
                v = v + c * approx[p]
            approx[n.id] = np.asarray(v, dtype=float)
        else:
            if n.pwa is None:
                raise MissingFit(f"node {n.id} ({n.label}) has no PWA fit")
            parent = g[n.parents[0]]
            x = approx[n.parents[0]]
            if check:
                allowed = parent.inflated_domain
                slack = 1e-9 * (1.0 + allowed.mag)
                if np.any(x < allowed.lo - slack) or np.any(x > allowed.hi + slack):
                    worst = float(np.max(np.maximum(allowed.lo - x, x - allowed.hi)))
                    raise OutOfDomain(
                        f"approximate input of node {n.id} leaves {allowed} by {worst:.3g}"
                    )
            approx[n.id] = np.asarray(n.pwa.eval(iv.clamp(x, n.pwa.domain)), dtype=float)
    ex, ap = exact[g.output], approx[g.output]
    if ex.ndim == 0:
        return float(ex), float(ap)
    return ex, ap
