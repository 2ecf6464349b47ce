"""Command line front end: ``pwabound {approx,compose,allocate,staircase}``.

Every command writes JSON and CSV files into ``--out`` and exits with status
0 only if all artifacts were written and every printed bound was verified;
1 if a verification failed; 2 on invalid input or a library error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import alloc, approx, bench, chain
from .expr import ExprError, lambdify, parse
from .interval import Interval, IntervalError
from .pwa import PwaError

FMT = "%.17g"
# slack for comparing computed errors against bounds
VERIFY_SLACK = 1e-8


class UsageError(ValueError):
    pass


def _fmt(x) -> str:
    return FMT % x


def parse_range(text: str) -> Interval:
    try:
        lo, hi = text.split(":")
        return Interval(float(lo), float(hi))
    except (ValueError, IntervalError) as exc:
        raise UsageError(f"expected lo:hi, got {text!r}") from exc


def parse_box(items) -> dict:
    box = {}
    for item in items or ():
        name, _, rng = item.partition("=")
        if not name or not rng:
            raise UsageError(f"expected name=lo:hi, got {item!r}")
        box[name.strip()] = parse_range(rng)
    return box


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _method(m: str) -> str:
    return {"1": "method1", "2": "method2", "method1": "method1", "method2": "method2"}[m]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float | np.floating) else v for v in row])


# ---------------------------------------------------------------------------
# approx
# ---------------------------------------------------------------------------

def cmd_approx(args) -> int:
    f = parse(args.f)
    if len(f.variables()) > 1:
        raise UsageError("approx needs an expression in a single variable")
    name = approx.unary_name(f)
    dom = parse_range(args.domain)
    method = _method(args.method)
    if method == "method1":
        p = approx.method1_breakpoints(f, dom, approx.Method1Config(args.tol))
        cfg2 = None
    else:
        cfg2 = approx.Method2Config.certified(f, dom, args.tol)
        p = approx.method2_breakpoints(f, dom, cfg2)
    bp = p.breakpoints
    seg_err = [approx.eval_err(f, a, b) for a, b in zip(bp[:-1], bp[1:])]
    achieved = max(seg_err)
    ok = achieved <= args.tol + VERIFY_SLACK
    print(f"breakpoints: {p.n_breakpoints}")
    print(f"eval_err: {_fmt(achieved)} (tolerance {_fmt(args.tol)})")
    result = {"function": args.f, "variable": name, "domain": [dom.lo, dom.hi], "method": method,
              "tolerance": args.tol, "n_breakpoints": p.n_breakpoints, "eval_err": achieved,
              "segment_errors": seg_err, "pwa": p.to_dict()}
    if cfg2 is not None:
        bounds = approx.segment_bounds(p, f, cfg2.d3)
        result["d3"] = cfg2.d3
        result["segment_bounds"] = [float(b) for b in bounds]
        for k, (b, e) in enumerate(zip(bounds, seg_err)):
            print(f"  segment {k}: bound {_fmt(b)} eval_err {_fmt(e)}")
        ok = ok and bool(np.all(bounds <= args.tol * (1 + 1e-9) + VERIFY_SLACK))
        ok = ok and all(e <= b + VERIFY_SLACK for e, b in zip(seg_err, bounds))
    out = Path(args.out)
    _write_json(out / "approx.json", result)
    xs = np.union1d(np.linspace(dom.lo, dom.hi, args.grid), bp)
    fx = lambdify(f, name)(xs)
    px = p.eval(xs)
    _write_csv(out / "approx.csv", ["x", "f", "pwa", "error"],
               zip(xs, fx, px, np.abs(px - fx)))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# compose
# ---------------------------------------------------------------------------

def _tau_map(g: chain.DecompGraph, args) -> dict:
    ids = [n.id for n in g.unary_nodes()]
    if args.taus is not None:
        vals = parse_floats(args.taus)
        if len(vals) != len(ids):
            raise UsageError(f"--taus needs {len(ids)} values, one per unary node, got {len(vals)}")
        return dict(zip(ids, vals))
    if args.tol is None:
        raise UsageError("give --tol or --taus")
    return {i: args.tol for i in ids}


def _validation_points(box: dict, grid: int, seed: int, max_points: int = 4_000_000):
    """Full grid for one or two inputs, otherwise seeded random samples."""
    names = sorted(box)
    if len(names) <= 2 and grid ** len(names) <= max_points:
        axes = [np.linspace(box[n].lo, box[n].hi, grid) for n in names]
        mesh = np.meshgrid(*axes, indexing="ij")
        return {n: m.ravel() for n, m in zip(names, mesh)}
    rng = np.random.default_rng(seed)
    return {n: rng.uniform(box[n].lo, box[n].hi, grid) for n in names}


def cmd_compose(args) -> int:
    f = parse(args.f)
    box = parse_box(args.box)
    g = chain.decompose(f, box, inflate=args.domains == "inflated")
    taus = _tau_map(g, args)
    fit_method = "secant" if args.mode == "secant" else _method(args.method)
    if any(t == 0.0 for t in taus.values()):
        if g.unary_nodes():
            raise UsageError("zero tolerance needs an expression without unary nodes")
    fitted = chain.fit_tolerances(g, taus, method=fit_method)
    modes = ("affine_thm2", "pwa_cor1", "secant_cor3") if args.mode == "secant" else ("pwa_cor1", "secant_cor3")
    eps = {m: chain.propagate_error(fitted, m) for m in modes}
    print(f"{'id':>3} {'node':<11} {'tau':>12} " + " ".join(f"{m:>12}" for m in modes))
    for n in fitted.nodes:
        if n.kind == "input":
            continue
        print(f"{n.id:>3} {n.label:<11} {n.tau:>12.6g} " + " ".join(f"{eps[m][n.id]:>12.6g}" for m in modes))
    pts = _validation_points(box, args.grid, args.seed)
    exact, appr = chain.eval_composed(fitted, pts)
    exact, appr = np.atleast_1d(exact), np.atleast_1d(appr)
    emp = float(np.max(np.abs(appr - exact))) if exact.size else 0.0
    out_eps = {m: eps[m][fitted.output] for m in modes}
    print(f"empirical max error: {_fmt(emp)}")
    ok = emp <= out_eps["pwa_cor1"] + VERIFY_SLACK and out_eps["pwa_cor1"] <= out_eps["secant_cor3"] + VERIFY_SLACK
    if "affine_thm2" in out_eps:
        ok = ok and emp <= out_eps["affine_thm2"] + VERIFY_SLACK
    out = Path(args.out)
    doc = fitted.to_dict()
    doc["function"] = args.f
    doc["eps"] = {m: {str(k): v for k, v in e.items()} for m, e in eps.items()}
    doc["empirical_max_error"] = emp
    _write_json(out / "compose.json", doc)
    names = sorted(box)
    _write_csv(out / "compose.csv", names + ["exact", "approx"] + [f"eps_{m}" for m in modes],
               ([*(pts[n][k] for n in names), exact[k], appr[k], *(out_eps[m] for m in modes)]
                for k in range(exact.size)))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# allocate
# ---------------------------------------------------------------------------

def cmd_allocate(args) -> int:
    if (args.budget is None) == (args.target is None):
        raise UsageError("give exactly one of --budget and --target")
    if args.bench == "tower":
        f, box = bench.tower()
        text = bench.tower_text()
        tau_range = bench.TOWER_TAU_RANGE
    else:
        if not args.f:
            raise UsageError("give --f or --bench")
        f, box, text = parse(args.f), parse_box(args.box), args.f
        tau_range = None
    if args.tau_range:
        r = parse_range(args.tau_range)
        tau_range = (r.lo, r.hi)
    if args.domains is None:
        inflate = not (args.bench == "tower" and not bench.TOWER_INFLATE)
    else:
        inflate = args.domains == "inflated"
    g = chain.decompose(f, box, inflate=inflate)
    out = Path(args.out)
    pts = _validation_points(box, args.grid, args.seed)
    ok = True
    if args.uniform_baseline:
        if args.budget is None:
            raise UsageError("--uniform-baseline needs --budget")
        fitted = chain.fit_uniform(g, alloc.uniform_counts(g, args.budget))
        doc = {"mode": "uniform", "total_breakpoints": sum(n.pwa.n_breakpoints for n in fitted.unary_nodes()),
               "nodes": [{"id": n.id, "tau": n.tau, "n_breakpoints": n.pwa.n_breakpoints}
                         for n in fitted.unary_nodes()]}
    else:
        if tau_range is None:
            raise UsageError("give --tau-range lo:hi")
        sts = alloc.graph_staircases(g, tau_range, args.samples, _method(args.method), args.budget)
        t0 = time.perf_counter()
        coeffs = alloc.frozen_coefficients(g, sts)
        if args.budget is not None:
            res = alloc.solve_p2(g, sts, args.budget, coeffs)
        else:
            res = alloc.solve_p1(g, sts, args.target, coeffs)
        solve_time = time.perf_counter() - t0
        print(f"{res.mode}: total breakpoints {res.total_breakpoints}, bound {_fmt(res.composed_bound)}, "
              f"solved in {solve_time:.3f} s")
        fitted = chain.fit_tolerances(g, res.taus, method=_method(args.method))
        doc = res.to_dict()
        doc["staircases"] = [sts[i].to_dict() for i in sorted(sts)]
        cor3 = chain.propagate_error(fitted)[fitted.output]
        ok = cor3 <= res.composed_bound + 1e-9
    eps = chain.propagate_error(fitted)[fitted.output]
    eps1 = chain.propagate_error(fitted, "pwa_cor1")[fitted.output]
    exact, appr = chain.eval_composed(fitted, pts)
    emp = float(np.max(np.abs(np.atleast_1d(appr) - np.atleast_1d(exact))))
    print(f"cor3 bound {_fmt(eps)}, cor1 bound {_fmt(eps1)}, empirical max error {_fmt(emp)}")
    ok = ok and emp <= eps1 + VERIFY_SLACK and eps1 <= eps + VERIFY_SLACK
    doc["fitted_breakpoints"] = sum(n.pwa.n_breakpoints for n in fitted.unary_nodes())
    doc.update(function=text, cor3_bound=eps, cor1_bound=eps1, empirical_max_error=emp,
               graph=fitted.to_dict())
    _write_json(out / ("uniform.json" if args.uniform_baseline else "allocation.json"), doc)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# staircase
# ---------------------------------------------------------------------------

def cmd_staircase(args) -> int:
    r = parse_range(args.tau_range)
    out = Path(args.out)
    if args.bench == "table1":
        for label, f, dom in bench.table1():
            s1 = alloc.staircase_samples(f, dom, r.lo, r.hi, args.samples, "method1")
            s2 = alloc.staircase_samples(f, dom, r.lo, r.hi, args.samples, "method2")
            rows = [(t, n1, n2) for (t, n1), (_, n2) in zip(s1, s2)][::-1]
            # informational: at exact ties Method 2 can land on the domain end
            # while Method 1 stops a bisection step short and needs one more
            bad = sum(1 for _, n1, n2 in rows if n1 > n2)
            print(f"{label}: {len(rows)} tolerances, method1 > method2 at {bad}")
            _write_csv(out / f"staircase_{label}.csv", ["tau", "n_method1", "n_method2"], rows)
        return 0
    if not args.f:
        raise UsageError("give --f or --bench")
    f = parse(args.f)
    st = alloc.build_staircase(f, parse_range(args.domain), r.lo, r.hi, args.samples, _method(args.method))
    for t, n in st.candidates:
        print(f"{_fmt(t)} {n}")
    _write_csv(out / "staircase.csv", ["tau", "n"], st.candidates)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pwabound", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--grid", type=int, default=2001, help="validation grid points per axis")
        sp.add_argument("--seed", type=int, default=0)

    a = sub.add_parser("approx", help="PWA fit of a unary function")
    a.add_argument("--f", required=True)
    a.add_argument("--domain", required=True)
    a.add_argument("--tol", type=float, required=True)
    a.add_argument("--method", default="1", choices=["1", "2", "method1", "method2"])
    common(a)
    a.set_defaults(func=cmd_approx)

    c = sub.add_parser("compose", help="decompose, fit and propagate error")
    c.add_argument("--f", required=True)
    c.add_argument("--box", action="append", required=True, help="name=lo:hi, repeatable")
    c.add_argument("--tol", type=float)
    c.add_argument("--taus", help="comma-separated tolerances, one per unary node in order")
    c.add_argument("--method", default="1", choices=["1", "2", "method1", "method2"])
    c.add_argument("--mode", default="pwa", choices=["pwa", "secant"])
    c.add_argument("--domains", default="inflated", choices=["inflated", "exact"])
    common(c)
    c.set_defaults(func=cmd_compose)

    al = sub.add_parser("allocate", help="breakpoint or tolerance allocation")
    al.add_argument("--f")
    al.add_argument("--box", action="append")
    al.add_argument("--bench", choices=["tower"])
    al.add_argument("--budget", type=int)
    al.add_argument("--target", type=float)
    al.add_argument("--uniform-baseline", action="store_true")
    al.add_argument("--tau-range")
    al.add_argument("--samples", type=int, default=500)
    al.add_argument("--method", default="1", choices=["1", "2", "method1", "method2"])
    al.add_argument("--domains", choices=["inflated", "exact"],
                    help="fit over inflated or exact ranges (default: exact for the tower bench)")
    common(al)
    al.set_defaults(func=cmd_allocate)

    s = sub.add_parser("staircase", help="tolerance versus breakpoint count")
    s.add_argument("--f")
    s.add_argument("--domain")
    s.add_argument("--bench", choices=["table1"])
    s.add_argument("--tau-range", default="1e-4:1")
    s.add_argument("--samples", type=int, default=500)
    s.add_argument("--method", default="1", choices=["1", "2", "method1", "method2"])
    common(s)
    s.set_defaults(func=cmd_staircase)
    return p


# flags whose values may start with '-' (e.g. ``--domain -1:1``)
_RANGE_FLAGS = ("--domain", "--box", "--tau-range")


def _join_negative(argv: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _RANGE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_negative(argv))
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except (UsageError, ExprError, IntervalError, PwaError, approx.ApproxError, chain.ChainError,
            alloc.AllocError) as exc:
        msg = f"error: {exc}"
        if isinstance(exc, alloc.InfeasibleBudget):
            msg += f" (minimal feasible budget {exc.minimum})"
        if isinstance(exc, alloc.InfeasibleTolerance):
            msg += f" (minimal feasible target {exc.minimum:.17g})"
        print(msg, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
