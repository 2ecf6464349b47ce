"""Breakpoint placement for secant (SOS) approximations of unary functions.

Two constructions are provided:

* :func:`method1_breakpoints`: bisection on the measured secant error, which
  places each breakpoint as far right as the tolerance allows.
* :func:`method2_breakpoints`: closed-form steps from the cubic error bound
  ``(d3/8) w^3 + (d2/8) w^2`` with ``d2 = |f''(left)|``; no error measurements.

plus :func:`uniform_breakpoints` as a baseline.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np

from .expr import EvalDomainError, Expr, compile_raw, eval_interval, lambdify, nth_derivative
from .interval import Interval
from .pwa import PwaFunction1D

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class ApproxError(ValueError):
    pass


class ToleranceUnreachable(ApproxError):
    """Bisection collapsed while the error stayed above tolerance."""


class InvalidD3(ApproxError):
    pass


class DegenerateStep(ApproxError):
    pass


class NegativeInput(ApproxError):
    pass


class BadCount(ApproxError):
    pass


def unary_name(f: Expr) -> str:
    names = sorted(f.variables())
    if len(names) > 1:
        raise ApproxError(f"expected a unary expression, got variables {names}")
    return names[0] if names else "x"


@dataclass(frozen=True)
class Method1Config:
    tolerance: float
    breakpoint_tolerance: float | None = None  # None -> 1e-6 * domain width
    eval_err_samples: int = 1024
    refine_tol: float = 1e-10

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ApproxError("tolerance must be positive")
        if self.breakpoint_tolerance is not None and not self.breakpoint_tolerance > 0:
            raise ApproxError("breakpoint_tolerance must be positive")
        if self.eval_err_samples < 8:
            raise ApproxError("eval_err_samples must be at least 8")


@dataclass(frozen=True)
class Method2Config:
    tolerance: float
    d3: float
    second_derivative: Expr | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ApproxError("tolerance must be positive")
        if self.d3 < 0:
            raise InvalidD3(f"d3 must be nonnegative, got {self.d3}")

    @classmethod
    def certified(cls, f: Expr, domain: Interval, tolerance: float) -> "Method2Config":
        """Config with ``d3`` certified by interval evaluation of ``f'''``."""
        name = unary_name(f)
        return cls(tolerance, certified_d3(f, domain), nth_derivative(f, name, 2))


# ---------------------------------------------------------------------------
# secant error
# ---------------------------------------------------------------------------

class _Evaluator:
    """Vector and scalar evaluators of a unary expression."""

    def __init__(self, f: Expr):
        name = unary_name(f)
        self.expr = f
        self.vec = compile_raw(f, name, vector=True)
        self.scalar = compile_raw(f, name, vector=False)

    def values(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            out = self.vec(x)
        if not isinstance(out, np.ndarray) or out.shape != x.shape:
            out = np.broadcast_to(np.asarray(out, dtype=float), x.shape)
        if not np.isfinite(out).all():
            raise EvalDomainError(f"{self.expr} is not finite on [{x[0]}, {x[-1]}]")
        return out


def eval_err(f: Expr, a: float, b: float, cfg: Method1Config | None = None) -> float:
    """Max of ``|secant - f|`` over ``[a, b]``.

    A uniform scan locates the local maxima of the error, each of which is then
    refined by golden-section search down to ``cfg.refine_tol``.  This is a
    sampling method, not a certified global optimizer: features narrower than
    the scan spacing can be missed.
    """
    if cfg is None:
        cfg = Method1Config(1.0)
    if not a < b:
        raise ApproxError(f"need a < b, got [{a}, {b}]")
    return _secant_error(_Evaluator(f), a, b, cfg.eval_err_samples, cfg.refine_tol)


def _secant_error(fe: _Evaluator, a, b, samples, refine_tol, above=math.inf) -> float:
    # returns early once the error is known to exceed ``above``
    xs = a + (b - a) * _unit_grid(samples)
    xs[-1] = b
    fx = fe.values(xs)
    fa, fb = fx[0], fx[-1]
    slope = (fb - fa) / (b - a)
    es = np.abs(fx - (fa + slope * (xs - a)))
    best = float(es.max())
    if best > above:
        return best
    interior = es[1:-1]
    peaks = np.flatnonzero((interior >= es[:-2]) & (interior >= es[2:])) + 1
    if peaks.size == 0:
        return best
    width = xs[2] - xs[0]
    if width <= refine_tol:
        return best
    n_iter = int(math.ceil(math.log(refine_tol / width) / math.log(INV_PHI)))
    if peaks.size <= _SCALAR_PEAKS:
        fs = fe.scalar
        fa, slope, a = float(fa), float(slope), float(a)

        def err(x):
            try:
                return abs(fs(x) - (fa + slope * (x - a)))
            except (ArithmeticError, ValueError):
                raise EvalDomainError(f"{fe.expr} cannot be evaluated at {x!r}") from None

        for i in peaks:
            best = max(best, _golden_max(err, float(xs[i - 1]), float(xs[i + 1]), n_iter))
            if best > above:
                break
        return best

    def verr(x):
        with np.errstate(all="ignore"):
            return np.abs(fe.vec(x) - (fa + slope * (x - a)))

    return max(best, _golden_max_vec(verr, xs[peaks - 1], xs[peaks + 1], n_iter))


_SCALAR_PEAKS = 8


@lru_cache(maxsize=8)
def _unit_grid(n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)
    t.flags.writeable = False
    return t


def _golden_max(err, lo: float, hi: float, n_iter: int) -> float:
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    ec, ed = err(c), err(d)
    for _ in range(n_iter):
        if ec > ed:
            hi, d, ed = d, c, ec
            c = hi - INV_PHI * (hi - lo)
            ec = err(c)
        else:
            lo, c, ec = c, d, ed
            d = lo + INV_PHI * (hi - lo)
            ed = err(d)
    return max(ec, ed)


def _golden_max_vec(err, lo: np.ndarray, hi: np.ndarray, n_iter: int) -> float:
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    ec, ed = err(c), err(d)
    for _ in range(n_iter):
        left = ec > ed
        # keep [lo, d] where the left probe wins, else [c, hi]
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        keep = np.where(left, c, d)
        ekeep = np.where(left, ec, ed)
        new = np.where(left, hi - INV_PHI * (hi - lo), lo + INV_PHI * (hi - lo))
        enew = err(new)
        c = np.where(left, new, keep)
        ec = np.where(left, enew, ekeep)
        d = np.where(left, keep, new)
        ed = np.where(left, ekeep, enew)
    return float(np.nanmax(np.maximum(ec, ed)))


# ---------------------------------------------------------------------------
# Method 1
# ---------------------------------------------------------------------------

def method1_breakpoints(f: Expr, domain: Interval, cfg: Method1Config) -> PwaFunction1D:
    """Greedy bisection placement.

    From each breakpoint ``x_k``, bisect on the right end ``m`` of the candidate
    segment until both ``u - l <= dx`` and the last measured error is within
    tolerance; the next breakpoint is the lower bisection limit ``l``.
    """
    fe = _Evaluator(f)
    tau = cfg.tolerance
    x_lo, x_hi = domain.lo, domain.hi
    if not x_lo < x_hi:
        raise ApproxError("domain must have positive width")
    dx = cfg.breakpoint_tolerance or 1e-6 * (x_hi - x_lo)
    n, rtol = cfg.eval_err_samples, cfg.refine_tol

    xs = [x_lo]
    e = _secant_error(fe, x_lo, x_hi, n, rtol, tau)
    while e > tau:
        xk = xs[-1]
        lo, hi = xk, x_hi
        m = 0.5 * (lo + hi)
        while hi - lo > dx or e > tau:
            e = _secant_error(fe, xk, m, n, rtol, tau)
            if e < tau:
                lo = m
            elif e > tau:
                hi = m
            else:
                lo = hi = m
            m = 0.5 * (lo + hi)
            if e > tau and (hi - lo <= 4.0 * np.spacing(max(abs(lo), abs(hi))) or m <= xk):
                raise ToleranceUnreachable(
                    f"bisection collapsed at x={xk!r} with error {e:.3g} > {tau:.3g}"
                )
        if not lo > xk:
            raise ToleranceUnreachable(f"no progress from breakpoint {xk!r}")
        xs.append(lo)
        e = _secant_error(fe, lo, x_hi, n, rtol, tau)
    xs.append(x_hi)
    xs = np.asarray(xs)
    return PwaFunction1D(xs, fe.values(xs))


# ---------------------------------------------------------------------------
# Method 2
# ---------------------------------------------------------------------------

def theorem1_bound(d2: float, d3: float, width: float) -> float:
    """Secant error bound ``(d3/8) w^3 + (d2/8) w^2`` for a C^3 function."""
    if d2 < 0 or d3 < 0 or width < 0:
        raise NegativeInput("d2, d3 and width must be nonnegative")
    return width * width * (d3 / 8.0 * width + d2 / 8.0)


def cubic_real_roots(a: float, b: float, c: float, d: float) -> list[float]:
    """Real roots of ``a x^3 + b x^2 + c x + d``, sorted ascending.

    Closed form (trigonometric for three real roots, Cardano otherwise),
    each root polished by Newton steps.
    """
    if a == 0.0:
        if b == 0.0:
            return [] if c == 0.0 else [-d / c]
        disc = c * c - 4.0 * b * d
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        q = -0.5 * (c + math.copysign(sq, c))
        roots = [q / b] + ([d / q] if q != 0.0 else [])
        return sorted(roots)
    B, C, D = b / a, c / a, d / a
    shift = B / 3.0
    p = C - B * B / 3.0
    q = 2.0 * B**3 / 27.0 - B * C / 3.0 + D
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if p == 0.0 and q == 0.0:
        r0 = -shift
    elif disc > 0:
        sq = math.sqrt(disc)
        r0 = float(np.cbrt(-q / 2.0 + sq) + np.cbrt(-q / 2.0 - sq)) - shift
    else:
        r = math.sqrt(-p / 3.0)
        arg = max(-1.0, min(1.0, 3.0 * q / (2.0 * p * r)))
        r0 = 2.0 * r * math.cos(math.acos(arg) / 3.0) - shift

    def poly(x):
        return ((a * x + b) * x + c) * x + d

    def dpoly(x):
        return (3.0 * a * x + 2.0 * b) * x + c

    def polish(x):
        for _ in range(3):
            dp = dpoly(x)
            if dp == 0.0:
                break
            step = poly(x) / dp
            x -= step
            if abs(step) <= 1e-15 * max(1.0, abs(x)):
                break
        return x

    r0 = polish(r0)
    # deflate by the polished root; the remaining pair comes from a quadratic,
    # where a discriminant lost in rounding is read as a double root
    b2 = b + a * r0
    c2 = c + b2 * r0
    disc2 = b2 * b2 - 4.0 * a * c2
    roots = [r0]
    if disc2 >= -1e-12 * (b2 * b2 + abs(4.0 * a * c2)):
        sq = math.sqrt(max(disc2, 0.0))
        qq = -0.5 * (b2 + math.copysign(sq, b2))
        if qq != 0.0:
            roots += [polish(qq / a), polish(c2 / qq)]
        else:
            roots += [0.0, 0.0] if c2 == 0.0 else []
    return sorted(roots)


def _step_width(d2: float, d3: float, tau: float) -> float:
    """Positive root of ``(d3/8) w^3 + (d2/8) w^2 = tau``."""
    try:
        roots = [r for r in cubic_real_roots(d3 / 8.0, d2 / 8.0, 0.0, -tau) if r > 0]
    except OverflowError:
        # wildly unbalanced coefficients; the Newton fallback below handles them
        roots = []
    if not roots and d2 <= 0 and d3 <= 0:
        return math.nan
    w = max(roots) if roots else math.nan
    # closed forms lose digits when d2 dominates; the cubic is convex and
    # increasing on w > 0 so Newton from an upper bound converges monotonically
    if not math.isfinite(w) or abs(theorem1_bound(d2, d3, w) - tau) > 1e-12 * tau:
        bounds = []
        if d3 > 0:
            bounds.append((8.0 * tau / d3) ** (1.0 / 3.0))
        if d2 > 0:
            bounds.append(math.sqrt(8.0 * tau / d2))
        w = min(bounds)
        for _ in range(100):
            g = theorem1_bound(d2, d3, w) - tau
            dg = 3.0 * d3 / 8.0 * w * w + d2 / 4.0 * w
            step = g / dg
            w -= step
            if step <= 1e-16 * w:
                break
    return w


def method2_breakpoints(f: Expr, domain: Interval, cfg: Method2Config) -> PwaFunction1D:
    """Algebraic placement from the cubic error bound.

    ``cfg.d3`` must bound ``|f'''|`` on the domain for the output to meet the
    tolerance; :meth:`Method2Config.certified` produces such a value.
    """
    name = unary_name(f)
    fn = lambdify(f, name)
    f2 = cfg.second_derivative
    if f2 is None:
        f2 = nth_derivative(f, name, 2)
    f2n = lambdify(f2, name)
    tau, d3 = cfg.tolerance, cfg.d3
    x_lo, x_hi = domain.lo, domain.hi
    if not x_lo < x_hi:
        raise ApproxError("domain must have positive width")
    span = x_hi - x_lo

    xs = [x_lo]
    d2 = abs(float(f2n(x_lo)))
    e = theorem1_bound(d2, d3, span)
    while e > tau:
        xk = xs[-1]
        if d2 == 0.0 and d3 == 0.0:
            raise DegenerateStep("zero curvature bound but the remaining span exceeds tolerance")
        w = _step_width(d2, d3, tau)
        nxt = xk + w
        if not (w > 1e-12 * span and x_lo <= nxt <= x_hi):
            raise DegenerateStep(f"no admissible root beyond {xk!r} (step {w!r})")
        xs.append(nxt)
        d2 = abs(float(f2n(nxt)))
        e = theorem1_bound(d2, d3, x_hi - nxt)
    xs.append(x_hi)
    return PwaFunction1D(xs, fn(np.asarray(xs)))


def certified_d3(f: Expr, domain: Interval) -> float:
    """Sound upper bound on ``max |f'''|`` over ``domain`` via interval evaluation."""
    name = unary_name(f)
    f3 = nth_derivative(f, name, 3)
    return eval_interval(f3, {name: domain}).mag


def segment_bounds(p: PwaFunction1D, f: Expr, d3: float) -> np.ndarray:
    """Cubic bound of every segment of ``p`` using its left-endpoint ``|f''|``."""
    name = unary_name(f)
    f2n = lambdify(nth_derivative(f, name, 2), name)
    bp = p.breakpoints
    d2 = np.abs(f2n(bp[:-1]))
    w = np.diff(bp)
    return d3 / 8.0 * w**3 + d2 / 8.0 * w**2


def uniform_breakpoints(f: Expr, domain: Interval, n: int) -> PwaFunction1D:
    if n < 2 or n != int(n):
        raise BadCount(f"need at least two breakpoints, got {n}")
    return PwaFunction1D.from_function(f, np.linspace(domain.lo, domain.hi, int(n)), unary_name(f))


def secant(f: Expr, domain: Interval) -> PwaFunction1D:
    return uniform_breakpoints(f, domain, 2)
