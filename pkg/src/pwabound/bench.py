"""Built-in benchmark problems."""

from __future__ import annotations

from .expr import Expr, parse
from .interval import Interval

# (label, expression, domain)
TABLE1 = (
    ("sin", "sin(x)", (0.0, 6.283185307179586)),
    ("square", "x^2", (-5.0, 5.0)),
    ("cube", "x^3", (-5.0, 5.0)),
    ("reciprocal", "1/x", (1.0, 10.0)),
)

TOWER_SOURCES = ((1.0, 3.0), (-2.0, 2.0), (3.0, 0.0), (-1.0, -4.0))
TOWER_BOX = {"x1": Interval(-5.0, 5.0), "x2": Interval(-5.0, 5.0)}
TOWER_BUDGET = 163
# tolerance range for the per-node staircases
TOWER_TAU_RANGE = (1e-2, 1.0)
# fit over exact ranges and clamp; inflating by the square errors pushes the
# reciprocal's input domain towards zero and inflates its derivative bound
TOWER_INFLATE = False


def table1() -> list[tuple[str, Expr, Interval]]:
    return [(name, parse(text), Interval(*dom)) for name, text, dom in TABLE1]


def _shift(v: str, c: float) -> str:
    return f"({v}-{c!r})" if c >= 0 else f"({v}+{-c!r})"


def tower_text(sources=TOWER_SOURCES) -> str:
    """Sum of ``1/(d_i^2 + 1)`` with ``d_i`` the distance to source ``i``."""
    return " + ".join(f"1/({_shift('x1', a)}^2+{_shift('x2', b)}^2+1)" for a, b in sources)


def tower(sources=TOWER_SOURCES) -> tuple[Expr, dict]:
    return parse(tower_text(sources)), dict(TOWER_BOX)
