"""Closed-interval arithmetic.

Every image is widened by a relative slack of ``SLACK`` per operation instead
of using directed rounding.  The widening is monotone in the endpoints, so
inclusion isotonicity (``a <= a2`` implies ``op(a) <= op(a2)``) is preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SLACK = 1e-14
TWO_PI = 2.0 * math.pi
# beyond this magnitude sin/cos return [-1, 1]
TRIG_ARG_CAP = 1e8


class IntervalError(ValueError):
    pass


class DomainError(IntervalError):
    """The function is undefined on part of the interval."""


class DomainContainsZero(DomainError):
    pass


class NegativeInflation(IntervalError):
    pass


def _widen(lo: float, hi: float) -> "Interval":
    return Interval(lo - SLACK * abs(lo), hi + SLACK * abs(hi))


@dataclass(frozen=True, slots=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise IntervalError(f"interval endpoints must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise IntervalError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def mag(self) -> float:
        """Largest absolute value in the interval."""
        return max(abs(self.lo), abs(self.hi))

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    __contains__ = contains

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        if isinstance(other, Interval):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Interval):
            return mul(self, recip(other))
        return scale(self, 1.0 / other)

    def __rtruediv__(self, other):
        return mul(_coerce(other), recip(self))

    def __neg__(self):
        return neg(self)

    def __pow__(self, n: int):
        return pow_int(self, n)


def _coerce(x) -> Interval:
    return x if isinstance(x, Interval) else Interval.point(x)


def add(a: Interval, b: Interval) -> Interval:
    return _widen(a.lo + b.lo, a.hi + b.hi)


def sub(a: Interval, b: Interval) -> Interval:
    return _widen(a.lo - b.hi, a.hi - b.lo)


def neg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo)


def scale(a: Interval, c: float) -> Interval:
    if c >= 0:
        return _widen(c * a.lo, c * a.hi)
    return _widen(c * a.hi, c * a.lo)


def mul(a: Interval, b: Interval) -> Interval:
    p = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return _widen(min(p), max(p))


def recip(a: Interval) -> Interval:
    if a.lo <= 0.0 <= a.hi:
        raise DomainContainsZero(f"reciprocal of {a} which contains zero")
    return _widen(1.0 / a.hi, 1.0 / a.lo)


def pow_int(a: Interval, n: int) -> Interval:
    if n != int(n) or n == 0:
        raise IntervalError(f"exponent must be a nonzero integer, got {n}")
    n = int(n)
    if n < 0:
        return recip(pow_int(a, -n))
    if n == 1:
        return a
    lo_n, hi_n = a.lo ** n, a.hi ** n
    if n % 2:
        return _widen(lo_n, hi_n)
    if a.lo <= 0.0 <= a.hi:
        return _widen(0.0, max(lo_n, hi_n))
    return _widen(min(lo_n, hi_n), max(lo_n, hi_n))


def _contains_point_mod(a: Interval, phase: float) -> bool:
    # is there an integer k with lo <= phase + 2*pi*k <= hi
    k = math.ceil((a.lo - phase) / TWO_PI)
    return phase + TWO_PI * k <= a.hi


def sin_im(a: Interval) -> Interval:
    if a.width >= TWO_PI or a.mag > TRIG_ARG_CAP:
        return Interval(-1.0, 1.0)
    s_lo, s_hi = math.sin(a.lo), math.sin(a.hi)
    lo, hi = min(s_lo, s_hi), max(s_lo, s_hi)
    if _contains_point_mod(a, 0.5 * math.pi):
        hi = 1.0
    if _contains_point_mod(a, -0.5 * math.pi):
        lo = -1.0
    return _clip_unit(_widen(lo, hi))


def cos_im(a: Interval) -> Interval:
    if a.width >= TWO_PI or a.mag > TRIG_ARG_CAP:
        return Interval(-1.0, 1.0)
    c_lo, c_hi = math.cos(a.lo), math.cos(a.hi)
    lo, hi = min(c_lo, c_hi), max(c_lo, c_hi)
    if _contains_point_mod(a, 0.0):
        hi = 1.0
    if _contains_point_mod(a, math.pi):
        lo = -1.0
    return _clip_unit(_widen(lo, hi))


def _clip_unit(a: Interval) -> Interval:
    return Interval(max(a.lo, -1.0), min(a.hi, 1.0))


def sqrt_im(a: Interval) -> Interval:
    if a.lo < 0.0:
        raise DomainError(f"sqrt undefined on {a}")
    return _widen(math.sqrt(a.lo), math.sqrt(a.hi))


def exp_im(a: Interval) -> Interval:
    try:
        return _widen(math.exp(a.lo), math.exp(a.hi))
    except OverflowError as exc:
        raise DomainError(f"exp overflows on {a}") from exc


def log_im(a: Interval) -> Interval:
    if a.lo <= 0.0:
        raise DomainError(f"log undefined on {a}")
    return _widen(math.log(a.lo), math.log(a.hi))


def abs_im(a: Interval) -> Interval:
    if a.lo >= 0.0:
        return a
    if a.hi <= 0.0:
        return neg(a)
    return Interval(0.0, a.mag)


def inflate(a: Interval, eps: float) -> Interval:
    if eps < 0:
        raise NegativeInflation(f"inflation must be nonnegative, got {eps}")
    return Interval(a.lo - eps, a.hi + eps)


def clamp(x, a: Interval):
    """Project ``x`` (scalar or array) onto ``a``."""
    if isinstance(x, float | int):
        return min(max(x, a.lo), a.hi)
    return np.clip(x, a.lo, a.hi)
