"""Immutable symbolic expression trees.

An :class:`Expr` is a node ``(kind, args, value)``:

* ``const``: ``value`` is a finite float
* ``var``: ``value`` is the variable name
* ``powi``: one child, ``value`` is a nonzero integer exponent
* ``add``, ``sub``, ``mul``, ``div``: two children
* ``neg``, ``sin``, ``cos``, ``sqrt``, ``exp``, ``log``, ``abs``: one child

Trees are built through :func:`parse` or the small constructor helpers and
operator overloads below.  Derivatives are cached per ``(expr, var)``.
"""

from __future__ import annotations

import math
import re
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from . import interval as iv
from .interval import Interval

FUNCTIONS = ("sin", "cos", "sqrt", "exp", "log", "abs")
BINARY = ("add", "sub", "mul", "div")
UNARY = ("neg",) + FUNCTIONS


class ExprError(Exception):
    pass


class ParseError(ExprError, ValueError):
    pass


class UnboundVariable(ExprError, KeyError):
    pass


class EvalDomainError(ExprError, ArithmeticError):
    pass


class NotDifferentiable(ExprError):
    pass


class Expr:
    __slots__ = ("kind", "args", "value", "_hash")

    def __init__(self, kind: str, args: tuple = (), value=None):
        if kind == "const":
            value = float(value)
            if not math.isfinite(value):
                raise ExprError(f"constants must be finite, got {value}")
        elif kind == "powi":
            if value != int(value) or int(value) == 0:
                raise ExprError(f"integer power needs a nonzero integer exponent, got {value}")
            value = int(value)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "args", tuple(args))
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "_hash", hash((kind, self.args, value)))

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr) or self._hash != other._hash:
            return False
        return self.kind == other.kind and self.value == other.value and self.args == other.args

    def __repr__(self):
        return f"Expr({to_string(self)!r})"

    def __str__(self):
        return to_string(self)

    def __reduce__(self):
        return (Expr, (self.kind, self.args, self.value))

    # construction sugar
    def __add__(self, other):
        return Expr("add", (self, _wrap(other)))

    def __radd__(self, other):
        return Expr("add", (_wrap(other), self))

    def __sub__(self, other):
        return Expr("sub", (self, _wrap(other)))

    def __rsub__(self, other):
        return Expr("sub", (_wrap(other), self))

    def __mul__(self, other):
        return Expr("mul", (self, _wrap(other)))

    def __rmul__(self, other):
        return Expr("mul", (_wrap(other), self))

    def __truediv__(self, other):
        return Expr("div", (self, _wrap(other)))

    def __rtruediv__(self, other):
        return Expr("div", (_wrap(other), self))

    def __neg__(self):
        return Expr("neg", (self,))

    def __pow__(self, n):
        return Expr("powi", (self,), n)

    @property
    def is_const(self) -> bool:
        return self.kind == "const"

    def variables(self) -> frozenset:
        return _variables(self)

    def size(self) -> int:
        """Number of nodes in the tree."""
        return 1 + sum(a.size() for a in self.args)


def _wrap(x) -> Expr:
    return x if isinstance(x, Expr) else const(x)


def const(c: float) -> Expr:
    return Expr("const", (), c)


def var(name: str) -> Expr:
    return Expr("var", (), name)


def sin(e):
    return Expr("sin", (_wrap(e),))


def cos(e):
    return Expr("cos", (_wrap(e),))


def sqrt(e):
    return Expr("sqrt", (_wrap(e),))


def exp(e):
    return Expr("exp", (_wrap(e),))


def log(e):
    return Expr("log", (_wrap(e),))


def absolute(e):
    return Expr("abs", (_wrap(e),))


@lru_cache(maxsize=4096)
def _variables(e: Expr) -> frozenset:
    if e.kind == "var":
        return frozenset((e.value,))
    out = frozenset()
    for a in e.args:
        out |= _variables(a)
    return out


# ---------------------------------------------------------------------------
# parsing and printing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)
_INT = re.compile(r"\d+$")


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r} at {pos}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self, value=None):
        kind, tok = self.peek()
        if kind is None:
            raise ParseError("unexpected end of input")
        if value is not None and tok != value:
            raise ParseError(f"expected {value!r}, got {tok!r}")
        self.i += 1
        return kind, tok

    def parse(self) -> Expr:
        e = self.expr()
        if self.i != len(self.tokens):
            raise ParseError(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            _, op = self.take()
            e = Expr("add" if op == "+" else "sub", (e, self.term()))
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op = self.take()
            e = Expr("mul" if op == "*" else "div", (e, self.unary()))
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            e = self.unary()
            if e.kind == "const":
                return const(-e.value)
            return Expr("neg", (e,))
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Expr("powi", (base,), self.exponent())
        return base

    def exponent(self) -> int:
        paren = self.peek()[1] == "("
        if paren:
            self.take()
        sign = 1
        if self.peek()[1] in ("-", "+"):
            sign = -1 if self.take()[1] == "-" else 1
        kind, tok = self.take()
        if kind != "num" or not _INT.match(tok):
            raise ParseError(f"exponent must be an integer literal, got {tok!r}")
        if paren:
            self.take(")")
        n = sign * int(tok)
        if n == 0:
            raise ParseError("exponent must be nonzero")
        return n

    def atom(self):
        kind, tok = self.take()
        if kind == "num":
            return const(float(tok))
        if kind == "ident":
            if tok in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Expr(tok, (arg,))
            return var(tok)
        if tok == "(":
            e = self.expr()
            self.take(")")
            return e
        raise ParseError(f"unexpected token {tok!r}")


def parse(text: str) -> Expr:
    """Parse infix text such as ``"(sin(1/x))^2 + 3*y"``."""
    return _Parser(text).parse()


_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "powi": 4}
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _prec(e: Expr) -> int:
    if e.kind == "const" and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 3
    return _PREC.get(e.kind, 5)


def _paren(e: Expr, ok: bool) -> str:
    s = to_string(e)
    return s if ok else f"({s})"


def to_string(e: Expr) -> str:
    """Canonical infix text; ``parse(to_string(e)) == e`` for parsed trees."""
    k = e.kind
    if k == "const":
        return repr(e.value)
    if k == "var":
        return e.value
    if k in BINARY:
        p = _PREC[k]
        left = _paren(e.args[0], _prec(e.args[0]) >= p)
        right = _paren(e.args[1], _prec(e.args[1]) > p)
        return f"{left} {_SYM[k]} {right}"
    if k == "neg":
        return "-" + _paren(e.args[0], _prec(e.args[0]) >= 3)
    if k == "powi":
        base = _paren(e.args[0], _prec(e.args[0]) > 4)
        n = e.value
        return f"{base}^{n}" if n > 0 else f"{base}^({n})"
    return f"{k}({to_string(e.args[0])})"


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

_MATH = {"sin": math.sin, "cos": math.cos, "exp": math.exp}


def eval_point(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate in IEEE double precision; raises on domain violations."""
    k = e.kind
    if k == "const":
        return e.value
    if k == "var":
        try:
            return float(bindings[e.value])
        except KeyError:
            raise UnboundVariable(e.value) from None
    if k in BINARY:
        a = eval_point(e.args[0], bindings)
        b = eval_point(e.args[1], bindings)
        if k == "add":
            return a + b
        if k == "sub":
            return a - b
        if k == "mul":
            return a * b
        if b == 0.0:
            raise EvalDomainError(f"division by zero in {e}")
        return a / b
    a = eval_point(e.args[0], bindings)
    try:
        if k == "neg":
            return -a
        if k == "powi":
            r = a ** e.value
        elif k == "sqrt":
            if a < 0:
                raise EvalDomainError(f"sqrt of negative value {a}")
            r = math.sqrt(a)
        elif k == "log":
            if a <= 0:
                raise EvalDomainError(f"log of nonpositive value {a}")
            r = math.log(a)
        elif k == "abs":
            r = abs(a)
        else:
            r = _MATH[k](a)
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise EvalDomainError(f"cannot evaluate {e} at {a}: {exc}") from exc
    if not math.isfinite(r):
        raise EvalDomainError(f"non-finite value evaluating {e}")
    return r


_IMAGE = {
    "sin": iv.sin_im,
    "cos": iv.cos_im,
    "sqrt": iv.sqrt_im,
    "exp": iv.exp_im,
    "log": iv.log_im,
    "abs": iv.abs_im,
    "neg": iv.neg,
}


def eval_interval(e: Expr, bindings: Mapping[str, Interval]) -> Interval:
    """Containment-sound enclosure of the range of ``e`` over a box."""
    k = e.kind
    if k == "const":
        return Interval.point(e.value)
    if k == "var":
        try:
            return bindings[e.value]
        except KeyError:
            raise UnboundVariable(e.value) from None
    if k in BINARY:
        a = eval_interval(e.args[0], bindings)
        b = eval_interval(e.args[1], bindings)
        if k == "add":
            return iv.add(a, b)
        if k == "sub":
            return iv.sub(a, b)
        if k == "mul":
            return iv.mul(a, b)
        return iv.mul(a, iv.recip(b))
    a = eval_interval(e.args[0], bindings)
    if k == "powi":
        return iv.pow_int(a, e.value)
    return _IMAGE[k](a)


_FN_SRC = {"sin": "sin", "cos": "cos", "sqrt": "sqrt", "exp": "exp", "log": "log"}
_OP_SRC = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _source(e: Expr, names: tuple) -> str:
    k = e.kind
    if k == "const":
        return f"({e.value!r})"
    if k == "var":
        try:
            return f"_a{names.index(e.value)}"
        except ValueError:
            raise UnboundVariable(e.value) from None
    if k in BINARY:
        return f"({_source(e.args[0], names)} {_OP_SRC[k]} {_source(e.args[1], names)})"
    a = _source(e.args[0], names)
    if k == "neg":
        return f"(-{a})"
    if k == "powi":
        return f"({a} ** {e.value})"
    if k == "abs":
        return f"abs({a})"
    return f"_m.{_FN_SRC[k]}({a})"


@lru_cache(maxsize=2048)
def _compiled(e: Expr, names: tuple, vector: bool) -> Callable:
    args = ", ".join(f"_a{i}" for i in range(len(names)))
    code = f"lambda {args}: {_source(e, names)}"
    return eval(code, {"_m": np if vector else math})  # noqa: S307 - generated from a trusted tree


def compile_raw(e: Expr, names, vector: bool = True) -> Callable:
    """Unchecked evaluator: numpy ufuncs when ``vector`` else ``math`` scalars."""
    names = (names,) if isinstance(names, str) else tuple(names)
    return _compiled(e, names, vector)


def lambdify(e: Expr, names) -> Callable:
    """Vectorized numpy evaluator ``f(*arrays)`` for variables ``names``.

    Raises :class:`EvalDomainError` if any output is non-finite.
    """
    raw = compile_raw(e, names, True)

    def f(*xs):
        with np.errstate(all="ignore"):
            out = raw(*(np.asarray(x, dtype=float) for x in xs))
        out = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(out)):
            raise EvalDomainError(f"non-finite value evaluating {e}")
        if xs and out.shape != np.shape(xs[0]):
            out = np.broadcast_to(out, np.broadcast_shapes(*(np.shape(x) for x in xs))).copy()
        return out

    return f


# ---------------------------------------------------------------------------
# simplification and differentiation
# ---------------------------------------------------------------------------

def _fold(e: Expr) -> Expr | None:
    try:
        return const(eval_point(e, {}))
    except (EvalDomainError, ExprError):
        return None


def _is(e: Expr, c: float) -> bool:
    return e.kind == "const" and e.value == c


def simplify(e: Expr) -> Expr:
    """Constant folding and the 0/1 identities; meaning is preserved."""
    return _simplify(e)


@lru_cache(maxsize=8192)
def _simplify(e: Expr) -> Expr:
    if not e.args:
        return e
    args = tuple(_simplify(a) for a in e.args)
    k = e.kind
    node = Expr(k, args, e.value)
    if all(a.kind == "const" for a in args):
        folded = _fold(node)
        if folded is not None:
            return folded
    if k == "add":
        a, b = args
        if _is(a, 0):
            return b
        if _is(b, 0):
            return a
    elif k == "sub":
        a, b = args
        if _is(b, 0):
            return a
        if _is(a, 0):
            return _simplify(Expr("neg", (b,)))
    elif k == "mul":
        a, b = args
        if _is(a, 0) or _is(b, 0):
            return const(0.0)
        if _is(a, 1):
            return b
        if _is(b, 1):
            return a
        if b.kind == "const":
            a, b = b, a
        if a.kind == "const":
            if a.value == -1:
                return _simplify(Expr("neg", (b,)))
            if b.kind == "mul" and b.args[0].kind == "const":
                return _simplify(Expr("mul", (const(a.value * b.args[0].value), b.args[1])))
            if b.kind == "neg":
                return _simplify(Expr("mul", (const(-a.value), b.args[0])))
            return Expr("mul", (a, b))
    elif k == "div":
        a, b = args
        if _is(a, 0):
            return const(0.0)
        if _is(b, 1):
            return a
    elif k == "neg":
        (a,) = args
        if a.kind == "neg":
            return a.args[0]
        if a.kind == "mul" and a.args[0].kind == "const":
            return _simplify(Expr("mul", (const(-a.args[0].value), a.args[1])))
    elif k == "powi":
        (a,) = args
        if e.value == 1:
            return a
        if a.kind == "powi":
            return Expr("powi", a.args, a.value * e.value)
    return node


def differentiate(e: Expr, name: str) -> Expr:
    """Simplified symbolic derivative of ``e`` with respect to ``name``."""
    return _diff(e, name)


@lru_cache(maxsize=4096)
def _diff(e: Expr, name: str) -> Expr:
    return _simplify(_d(e, name))


def _d(e: Expr, x: str) -> Expr:
    k = e.kind
    if name_free(e, x):
        return const(0.0)
    if k == "var":
        return const(1.0)
    if k in ("add", "sub"):
        return Expr(k, (_d(e.args[0], x), _d(e.args[1], x)))
    if k == "mul":
        u, v = e.args
        return _d(u, x) * v + u * _d(v, x)
    if k == "div":
        u, v = e.args
        dv = _d(v, x)
        if name_free(u, x):
            # d(c/v) = -c v' v^-2 keeps reciprocal powers monomial
            return Expr("neg", (u * dv * Expr("powi", (v,), -2),))
        return (_d(u, x) * v - u * dv) * Expr("powi", (v,), -2)
    u = e.args[0]
    du = _d(u, x)
    if k == "neg":
        return Expr("neg", (du,))
    if k == "powi":
        n = e.value
        if n == 1:
            return du
        inner = const(float(n)) if n - 1 == 0 else const(float(n)) * Expr("powi", (u,), n - 1)
        return inner * du
    if k == "sin":
        return cos(u) * du
    if k == "cos":
        return Expr("neg", (sin(u) * du,))
    if k == "exp":
        return exp(u) * du
    if k == "log":
        return du / u
    if k == "sqrt":
        return du / (const(2.0) * sqrt(u))
    if k == "abs":
        raise NotDifferentiable(f"abs is not differentiable: {e}")
    raise ExprError(f"unknown node kind {k!r}")


def name_free(e: Expr, name: str) -> bool:
    return name not in _variables(e)


def nth_derivative(e: Expr, name: str, n: int) -> Expr:
    for _ in range(n):
        e = differentiate(e, name)
    return e


def substitute(e: Expr, name: str, repl: Expr) -> Expr:
    if e.kind == "var":
        return repl if e.value == name else e
    if not e.args:
        return e
    return Expr(e.kind, tuple(substitute(a, name, repl) for a in e.args), e.value)
