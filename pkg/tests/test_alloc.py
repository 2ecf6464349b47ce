import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwabound import alloc, bench, chain
from pwabound.alloc import Staircase
from pwabound.approx import Method1Config, eval_err, method1_breakpoints
from pwabound.expr import parse
from pwabound.interval import Interval
from pwabound.pwa import empirical_max_error

from oracles import brute_force_p1, brute_force_p2
from strategies import random_instance, unary_chain

SIN = parse("sin(x)")
TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def sin_stairs():
    return alloc.build_staircase(SIN, Interval(0, TWO_PI), 1e-2, 1.0, samples=120)


class TestStaircase:
    def test_pruning(self):
        pairs = [(0.1, 10), (0.15, 10), (0.2, 9), (0.3, 9), (0.25, 9), (0.5, 4), (0.4, 6)]
        s = Staircase.from_samples(pairs, 3)
        assert s.candidates == [(0.1, 10), (0.2, 9), (0.4, 6), (0.5, 4)]
        assert s.node_id == 3 and s.min_count == 4 and len(s) == 4

    def test_pruning_drops_dominated(self):
        # a larger tolerance that needs more breakpoints is never useful
        s = Staircase.from_samples([(0.1, 5), (0.2, 7), (0.3, 3)])
        assert s.candidates == [(0.1, 5), (0.3, 3)]

    @pytest.mark.parametrize(
        "taus,counts",
        [((), ()), ((0.1, 0.1), (5, 4)), ((0.1, 0.2), (5, 5)), ((0.2, 0.1), (5, 4)), ((0.0,), (2,)), ((0.1,), ())],
    )
    def test_invalid(self, taus, counts):
        with pytest.raises(alloc.AllocError):
            Staircase(taus, counts)

    def test_breakpoints_for(self):
        s = Staircase((0.1, 0.3), (9, 4))
        assert s.breakpoints_for(0.05) is None
        assert s.breakpoints_for(0.1) == 9
        assert s.breakpoints_for(0.29) == 9
        assert s.breakpoints_for(5.0) == 4

    def test_dict_round_trip(self):
        s = Staircase((0.1, 0.3), (9, 4), 2)
        assert Staircase.from_dict(json.loads(json.dumps(s.to_dict()))) == s

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.floats(1e-6, 10), st.integers(2, 100)), min_size=1, max_size=60))
    def test_frontier_is_strict(self, pairs):
        s = Staircase.from_samples(pairs)
        assert all(b > a for a, b in zip(s.taus, s.taus[1:]))
        assert all(b < a for a, b in zip(s.counts, s.counts[1:]))
        # every raw sample is matched or beaten on both axes by a frontier entry
        for tau, n in pairs:
            assert any(t <= tau and c <= n for t, c in s.candidates)


class TestBuildStaircase:
    def test_sin_shape(self, sin_stairs):
        assert sin_stairs.breakpoints_for(0.3) == 4
        assert all(b < a for a, b in zip(sin_stairs.counts, sin_stairs.counts[1:]))

    def test_candidates_reproduce_counts(self, sin_stairs):
        for tau, n in sin_stairs.candidates:
            p = method1_breakpoints(SIN, Interval(0, TWO_PI), Method1Config(tau))
            assert p.n_breakpoints == n
            bp = p.breakpoints
            assert max(eval_err(SIN, a, b) for a, b in zip(bp[:-1], bp[1:])) <= tau + 1e-8

    def test_raw_samples_monotone(self):
        pairs = alloc.staircase_samples(SIN, Interval(0, TWO_PI), 1e-2, 1.0, samples=60)
        taus = [t for t, _ in pairs]
        counts = [n for _, n in pairs]
        assert taus == sorted(taus, reverse=True)
        assert counts == sorted(counts)

    def test_affine_single_candidate(self):
        s = alloc.build_staircase(parse("3*x - 1"), Interval(0, 1), 1e-4, 1.0, samples=20)
        assert s.counts == (2,)

    @pytest.mark.parametrize("method", ["method1", "method2"])
    def test_reciprocal_frontier_is_valid(self, method):
        f, dom = parse("1/x"), Interval(1, 10)
        s = alloc.build_staircase(f, dom, 1e-3, 1.0, samples=40, method=method)
        fit = alloc._fit_count
        for tau, n in s.candidates:
            assert fit(f, dom, tau, method) == n
            p = method1_breakpoints(f, dom, Method1Config(tau))
            assert empirical_max_error(p, f) <= tau

    def test_cap(self):
        pairs = alloc.staircase_samples(SIN, Interval(0, TWO_PI), 1e-4, 1.0, samples=50, max_breakpoints=10)
        assert max(n for _, n in pairs) <= 10
        # a cap below every count keeps only the coarsest sample
        s = alloc.build_staircase(SIN, Interval(0, TWO_PI), 1e-4, 1e-3, samples=5, max_breakpoints=3)
        assert s.taus == (1e-3,) and s.counts[0] > 3

    @pytest.mark.parametrize("lo,hi,samples", [(0.0, 1.0, 10), (1.0, 0.5, 10), (0.1, 1.0, 1)])
    def test_bad_arguments(self, lo, hi, samples):
        with pytest.raises(alloc.AllocError):
            alloc.staircase_samples(SIN, Interval(0, 1), lo, hi, samples)

    def test_unknown_method(self):
        with pytest.raises(alloc.AllocError):
            alloc.staircase_samples(SIN, Interval(0, 1), 0.1, 1.0, 3, method="method3")

    def test_graph_staircases_share(self):
        g = chain.decompose(parse("sin(x) + sin(y)"), {"x": Interval(0, 2), "y": Interval(0, 2)})
        stairs = alloc.graph_staircases(g, (1e-2, 1.0), samples=20)
        a, b = (stairs[n.id] for n in g.unary_nodes())
        assert a.candidates == b.candidates and a.node_id != b.node_id


class TestSolvers:
    def test_random_against_brute_force(self):
        rng = np.random.default_rng(12)
        for _ in range(60):
            g, ids, stairs, coeffs = random_instance(rng)
            cands = [stairs[i].candidates for i in ids]
            weights = [coeffs[i] for i in ids]
            lo = sum(stairs[i].min_count for i in ids)
            hi = sum(max(stairs[i].counts) for i in ids)
            N = int(rng.integers(lo, hi + 1))
            res = alloc.solve_p2(g, stairs, N, coeffs)
            assert res.total_breakpoints <= N
            assert res.composed_bound == brute_force_p2(cands, weights, N)
            T = float(rng.uniform(0.5, 1.5)) * res.composed_bound
            want = brute_force_p1(cands, weights, T)
            if want is None:
                with pytest.raises(alloc.InfeasibleTolerance):
                    alloc.solve_p1(g, stairs, T, coeffs)
            else:
                got = alloc.solve_p1(g, stairs, T, coeffs)
                assert got.total_breakpoints == want and got.composed_bound <= T

    def test_single_node_generous_budget(self):
        g = unary_chain(1)
        s = Staircase((0.01, 0.1, 0.5), (30, 10, 3), 1)
        res = alloc.solve_p2(g, {1: s}, 100, {1: 2.0})
        assert res.taus == {1: 0.01} and res.counts == {1: 30}
        assert res.composed_bound == 0.02

    def test_budget_monotone(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            g, ids, stairs, coeffs = random_instance(rng)
            lo = sum(stairs[i].min_count for i in ids)
            hi = sum(max(stairs[i].counts) for i in ids)
            bounds = [alloc.solve_p2(g, stairs, N, coeffs).composed_bound for N in range(lo, hi + 1)]
            assert all(b <= a for a, b in zip(bounds, bounds[1:]))

    def test_duality(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            g, ids, stairs, coeffs = random_instance(rng)
            lo = sum(stairs[i].min_count for i in ids)
            hi = sum(max(stairs[i].counts) for i in ids)
            N = int(rng.integers(lo, hi + 1))
            p2 = alloc.solve_p2(g, stairs, N, coeffs)
            assert alloc.solve_p1(g, stairs, p2.composed_bound, coeffs).total_breakpoints <= N

    def test_loose_target_gives_minimal_counts(self):
        rng = np.random.default_rng(7)
        g, ids, stairs, coeffs = random_instance(rng)
        res = alloc.solve_p1(g, stairs, 1e6, coeffs)
        assert res.counts == {i: stairs[i].min_count for i in ids}
        assert res.mode == "P1"

    def test_infeasible_budget(self):
        g = unary_chain(2)
        stairs = {1: Staircase((0.1,), (5,), 1), 2: Staircase((0.1, 0.2), (6, 4), 2)}
        with pytest.raises(alloc.InfeasibleBudget) as err:
            alloc.solve_p2(g, stairs, 8, {1: 1.0, 2: 1.0})
        assert err.value.minimum == 9

    def test_infeasible_tolerance(self):
        g = unary_chain(1)
        with pytest.raises(alloc.InfeasibleTolerance) as err:
            alloc.solve_p1(g, {1: Staircase((0.1, 0.2), (6, 4), 1)}, 0.05, {1: 1.0})
        assert err.value.minimum == 0.1
        with pytest.raises(alloc.AllocError):
            alloc.solve_p1(g, {1: Staircase((0.1,), (6,), 1)}, 0.0, {1: 1.0})

    def test_missing_staircase(self):
        with pytest.raises(alloc.AllocError):
            alloc.solve_p2(unary_chain(2), {1: Staircase((0.1,), (5,), 1)}, 20, {1: 1.0, 2: 1.0})

    def test_tie_break_on_tau_sum(self):
        # both selections cost 0.2 with coefficients (1, 0); the smaller tau sum wins
        g = unary_chain(2)
        stairs = {1: Staircase((0.2,), (2,), 1), 2: Staircase((0.1, 0.3), (3, 2), 2)}
        res = alloc.solve_p2(g, stairs, 10, {1: 1.0, 2: 0.0})
        assert res.taus == {1: 0.2, 2: 0.1}


@pytest.fixture(scope="module")
def setup():
    g = chain.decompose(parse("(sin(1/x))^2"), {"x": Interval(1, 3)})
    stairs = alloc.graph_staircases(g, (1e-3, 0.1), samples=40)
    return g, stairs


class TestWithGraph:
    def test_frozen_coefficients(self, setup):
        g, stairs = setup
        coeffs = alloc.frozen_coefficients(g, stairs)
        worst = chain.assign_tolerances(g, {i: s.taus[-1] for i, s in stairs.items()})
        assert coeffs == {n.id: chain.sensitivity(worst)[n.id] for n in g.unary_nodes()}

    @pytest.mark.parametrize("N", [12, 20, 40])
    def test_fitted_bound_below_allocation(self, setup, N):
        g, stairs = setup
        res = alloc.solve_p2(g, stairs, N)
        fitted = chain.fit_tolerances(g, res.taus)
        assert chain.propagate_error(fitted, "secant_cor3")[g.output] <= res.composed_bound + 1e-9
        # staircases come from the widest domains, so real fits never need more
        assert sum(n.pwa.n_breakpoints for n in fitted.unary_nodes()) <= res.total_breakpoints

    def test_result_json(self, setup):
        g, stairs = setup
        res = alloc.solve_p2(g, stairs, 20)
        d = json.loads(res.to_json())
        assert d["mode"] == "P2" and d["total_breakpoints"] == res.total_breakpoints
        assert [n["id"] for n in d["nodes"]] == sorted(res.taus)
        assert sum(n["coefficient"] * n["tau"] for n in d["nodes"]) == pytest.approx(res.composed_bound, rel=1e-15)

    def test_uniform_counts(self):
        f, box = bench.tower()
        counts = alloc.uniform_counts(chain.decompose(f, box, inflate=False), 163)
        assert sum(counts.values()) == 163 and set(counts.values()) == {13, 14}
        with pytest.raises(alloc.InfeasibleBudget):
            alloc.uniform_counts(unary_chain(3), 5)
