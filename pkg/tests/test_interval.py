import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwabound import interval as iv
from pwabound.interval import Interval

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def intervals(draw, lo=-1e3, hi=1e3):
    a = draw(st.floats(lo, hi, allow_nan=False))
    b = draw(st.floats(lo, hi, allow_nan=False))
    return Interval(min(a, b), max(a, b))


def close(a: Interval, lo, hi, rtol=1e-12):
    np.testing.assert_allclose([a.lo, a.hi], [lo, hi], rtol=rtol, atol=1e-15)


class TestConstruction:
    def test_rejects_empty(self):
        with pytest.raises(iv.IntervalError):
            Interval(1.0, 0.0)

    @pytest.mark.parametrize("lo,hi", [(-math.inf, 0.0), (0.0, math.nan), (math.inf, math.inf)])
    def test_rejects_nonfinite(self, lo, hi):
        with pytest.raises(iv.IntervalError):
            Interval(lo, hi)

    def test_accessors(self):
        a = Interval(-1, 3)
        assert a.width == 4 and a.mid == 1 and a.mag == 3
        assert 0 in a and 4 not in a
        assert a.contains(Interval(0, 1)) and not a.contains(Interval(0, 5))
        assert a.hull(Interval(5, 6)) == Interval(-1, 6)
        assert tuple(a) == (-1.0, 3.0)

    def test_immutable(self):
        with pytest.raises(AttributeError):
            Interval(0, 1).lo = 2


class TestArithmetic:
    def test_add(self):
        close(iv.add(Interval(0, 1), Interval(2, 3)), 2, 4)

    def test_scale_negative(self):
        close(iv.scale(Interval(-1, 2), -3), -6, 3)

    def test_sub_ignores_dependency(self):
        close(iv.sub(Interval(1, 3), Interval(1, 3)), -2, 2)

    def test_mul(self):
        close(iv.mul(Interval(-1, 2), Interval(3, 4)), -4, 8)
        close(iv.mul(Interval(0, 0), Interval(-5, 5)), 0, 0)
        close(iv.mul(Interval(1, 3), Interval(1, 3)), 1, 9)

    def test_recip(self):
        close(iv.recip(Interval(1, 3)), 1 / 3, 1)
        close(iv.recip(Interval(-4, -2)), -0.5, -0.25)

    @pytest.mark.parametrize("a", [Interval(-1, 1), Interval(0, 2), Interval(-3, 0)])
    def test_recip_across_zero(self, a):
        with pytest.raises(iv.DomainContainsZero):
            iv.recip(a)

    def test_operators(self):
        a, b = Interval(1, 2), Interval(3, 5)
        assert (a + b).contains(Interval(4, 7))
        assert (a - b).contains(Interval(-4, -1))
        assert (2 - a).contains(Interval(0, 1))
        assert (a * b).contains(Interval(3, 10))
        assert (a / b).contains(Interval(0.2, 2 / 3))
        assert (1 / a).contains(Interval(0.5, 1))
        assert (-a) == Interval(-2, -1)
        assert (a**2).contains(Interval(1, 4))


class TestImages:
    def test_sin_chain_domains(self):
        w2 = iv.recip(Interval(1, 3))
        w3 = iv.sin_im(w2)
        close(w3, math.sin(1 / 3), math.sin(1))
        close(iv.pow_int(w3, 2), math.sin(1 / 3) ** 2, math.sin(1) ** 2)

    def test_sin_full_period(self):
        assert iv.sin_im(Interval(0, 2 * math.pi)) == Interval(-1, 1)

    def test_sin_interior_max(self):
        a = iv.sin_im(Interval(1, 2))
        assert a.hi == 1.0
        close(a, math.sin(1), 1)

    def test_cos_interior_min(self):
        a = iv.cos_im(Interval(3, 4))
        assert a.lo == -1.0

    def test_trig_argument_cap(self):
        assert iv.sin_im(Interval(2e8, 2e8 + 1)) == Interval(-1, 1)

    def test_even_power_across_zero(self):
        close(iv.pow_int(Interval(-2, 1), 2), 0, 4)
        close(iv.pow_int(Interval(-2, 1), 3), -8, 1)

    def test_negative_power(self):
        close(iv.pow_int(Interval(1, 2), -2), 0.25, 1)
        with pytest.raises(iv.DomainContainsZero):
            iv.pow_int(Interval(-1, 1), -2)

    def test_zero_power_rejected(self):
        with pytest.raises(iv.IntervalError):
            iv.pow_int(Interval(1, 2), 0)

    @pytest.mark.parametrize(
        "fn,a", [(iv.sqrt_im, Interval(-1, 1)), (iv.log_im, Interval(0, 1)), (iv.exp_im, Interval(0, 1e3))]
    )
    def test_domain_errors(self, fn, a):
        with pytest.raises(iv.DomainError):
            fn(a)

    def test_abs(self):
        assert iv.abs_im(Interval(-3, 2)) == Interval(0, 3)
        assert iv.abs_im(Interval(-3, -2)) == Interval(2, 3)


class TestInflateClamp:
    def test_inflate(self):
        assert iv.inflate(Interval(0, 1), 0.05) == Interval(-0.05, 1.05)
        assert iv.inflate(Interval(1, 3), 0) == Interval(1, 3)
        close(iv.inflate(Interval(1 / 3, 1), 0.01), 1 / 3 - 0.01, 1.01)

    def test_negative_inflation(self):
        with pytest.raises(iv.NegativeInflation):
            iv.inflate(Interval(0, 1), -1e-3)

    def test_clamp(self):
        a = Interval(0, 1)
        assert iv.clamp(2.0, a) == 1.0
        np.testing.assert_array_equal(iv.clamp(np.array([-1.0, 0.5, 3.0]), a), [0.0, 0.5, 1.0])


UNARY = {
    "sin": (iv.sin_im, np.sin, (-50, 50)),
    "cos": (iv.cos_im, np.cos, (-50, 50)),
    "sqrt": (iv.sqrt_im, np.sqrt, (0, 100)),
    "exp": (iv.exp_im, np.exp, (-20, 20)),
    "log": (iv.log_im, np.log, (1e-6, 100)),
    "abs": (iv.abs_im, np.abs, (-50, 50)),
    "sq": (lambda a: iv.pow_int(a, 2), np.square, (-50, 50)),
    "cube": (lambda a: iv.pow_int(a, 3), lambda x: x**3, (-20, 20)),
    "recip": (iv.recip, lambda x: 1 / x, (0.01, 50)),
}
BINARY = {
    "add": (iv.add, np.add),
    "sub": (iv.sub, np.subtract),
    "mul": (iv.mul, np.multiply),
}


def _sample(rng, a: Interval, n):
    return np.concatenate([[a.lo, a.hi], rng.uniform(a.lo, a.hi, n)])


class TestContainmentFuzz:
    """Random operations on random intervals contain the image of sampled points."""

    def test_containment_fuzz(self):
        rng = np.random.default_rng(7)
        names = list(UNARY) + list(BINARY)
        for case in range(10_000):
            name = names[case % len(names)]
            if name in UNARY:
                fn, ref, (lo, hi) = UNARY[name]
                p, q = np.sort(rng.uniform(lo, hi, 2))
                a = Interval(p, q)
                out = fn(a)
                y = ref(_sample(rng, a, 20))
            else:
                fn, ref = BINARY[name]
                a = Interval(*np.sort(rng.uniform(-100, 100, 2)))
                b = Interval(*np.sort(rng.uniform(-100, 100, 2)))
                out = fn(a, b)
                y = ref(_sample(rng, a, 20), _sample(rng, b, 20))
            assert np.all(y >= out.lo) and np.all(y <= out.hi), (name, a, out)

    @settings(max_examples=300, deadline=None)
    @given(intervals(-40, 40), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_images(self, a, s, t):
        wider = Interval(a.lo - s, a.hi + t)
        for name in ("sin", "cos", "abs", "sq", "cube"):
            fn = UNARY[name][0]
            assert fn(wider).contains(fn(a)), name
        pos = Interval(abs(a.lo) + 1, abs(a.lo) + 1 + a.width)
        pos_wide = Interval(pos.lo - 0.5 * s, pos.hi + t)
        for fn in (iv.sqrt_im, iv.log_im, iv.recip):
            assert fn(pos_wide).contains(fn(pos))

    @settings(max_examples=300, deadline=None)
    @given(st.floats(1e-6, 1e6), st.floats(0, 1e6))
    def test_double_reciprocal(self, lo, w):
        a = Interval(lo, lo + w)
        back = iv.recip(iv.recip(a))
        assert back.contains(a)
        assert back.lo >= a.lo * (1 - 1e-12) and back.hi <= a.hi * (1 + 1e-12)

    @settings(max_examples=300, deadline=None)
    @given(intervals(), intervals(), finite)
    def test_binary_sound(self, a, b, c):
        for x in (a.lo, a.mid, a.hi):
            for y in (b.lo, b.mid, b.hi):
                assert x + y in iv.add(a, b)
                assert x - y in iv.sub(a, b)
                assert x * y in iv.mul(a, b)
            assert c * x in iv.scale(a, c)
