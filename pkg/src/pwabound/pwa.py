"""One-dimensional continuous piecewise-affine functions in SOS form."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .expr import Expr, lambdify
from .interval import Interval


class PwaError(ValueError):
    pass


class OutOfDomain(PwaError):
    pass


@dataclass(frozen=True, eq=False)
class Segment:
    domain: Interval
    slope: float
    intercept: float


class PwaFunction1D:
    """Breakpoints ``x_0 < ... < x_N`` with values ``y_k``, linearly interpolated.

    Instances are immutable; the arrays are marked read-only.
    """

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints, values):
        x = np.array(breakpoints, dtype=float)
        y = np.array(values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise PwaError("breakpoints and values must be 1-D arrays of equal length")
        if x.size < 2:
            raise PwaError("a PWA function needs at least two breakpoints")
        if not np.all(np.diff(x) > 0):
            raise PwaError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise PwaError("breakpoints and values must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "values", y)

    def __setattr__(self, name, value):
        raise AttributeError("PwaFunction1D is immutable")

    @classmethod
    def from_function(cls, f: Expr, breakpoints, name: str | None = None) -> "PwaFunction1D":
        """Interpolate ``f`` at ``breakpoints`` so every vertex lies on its graph."""
        x = np.asarray(breakpoints, dtype=float)
        name = name or _single_var(f)
        return cls(x, lambdify(f, name)(x))

    @property
    def domain(self) -> Interval:
        return Interval(self.breakpoints[0], self.breakpoints[-1])

    @property
    def n_breakpoints(self) -> int:
        return int(self.breakpoints.size)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    def __len__(self):
        return self.n_breakpoints

    def __repr__(self):
        return f"PwaFunction1D(n={self.n_breakpoints}, domain=[{self.breakpoints[0]!r}, {self.breakpoints[-1]!r}])"

    def __eq__(self, other):
        return (
            isinstance(other, PwaFunction1D)
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Evaluate at a scalar or array; ties at breakpoints go to the left segment."""
        xs = np.asarray(x, dtype=float)
        bp = self.breakpoints
        if np.any(xs < bp[0]) or np.any(xs > bp[-1]):
            raise OutOfDomain(f"point outside PWA domain [{bp[0]}, {bp[-1]}]")
        j = np.clip(np.searchsorted(bp, xs, side="left") - 1, 0, bp.size - 2)
        x0, x1 = bp[j], bp[j + 1]
        y0, y1 = self.values[j], self.values[j + 1]
        t = (xs - x0) / (x1 - x0)
        out = y0 + t * (y1 - y0)
        # exact on breakpoints
        out = np.where(xs == x1, y1, out)
        out = np.where(xs == x0, y0, out)
        return float(out) if out.ndim == 0 else out

    def max_abs_slope(self) -> float:
        return float(np.max(np.abs(self.slopes)))

    def segments(self) -> list[Segment]:
        bp, y = self.breakpoints, self.values
        out = []
        for a, b, ya, yb in zip(bp[:-1], bp[1:], y[:-1], y[1:]):
            slope = (yb - ya) / (b - a)
            out.append(Segment(Interval(a, b), float(slope), float(ya - slope * a)))
        return out

    def is_sos(self, f: Expr, rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        """True if every vertex lies on the graph of ``f``."""
        fy = lambdify(f, _single_var(f))(self.breakpoints)
        return bool(np.allclose(self.values, fy, rtol=rtol, atol=atol))

    def to_dict(self) -> dict:
        return {"breakpoints": [float(v) for v in self.breakpoints], "values": [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, d: dict) -> "PwaFunction1D":
        return cls(d["breakpoints"], d["values"])

    def to_json(self) -> str:
        # repr of a float round-trips exactly (at most 17 significant digits)
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PwaFunction1D":
        return cls.from_dict(json.loads(text))


def _single_var(f: Expr) -> str:
    names = sorted(f.variables())
    if len(names) > 1:
        raise PwaError(f"expected a unary expression, got variables {names}")
    return names[0] if names else "x"


def empirical_max_error(p: PwaFunction1D, f: Expr, grid_size: int = 10001) -> float:
    """Max of ``|p(x) - f(x)|`` over a uniform grid plus all breakpoints."""
    if grid_size < 2:
        raise PwaError("grid_size must be at least 2")
    bp = p.breakpoints
    xs = np.union1d(np.linspace(bp[0], bp[-1], grid_size), bp)
    fx = lambdify(f, _single_var(f))(xs)
    return float(np.max(np.abs(p.eval(xs) - fx)))
