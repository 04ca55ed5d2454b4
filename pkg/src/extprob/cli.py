"""Command line: solve, classify, simulate, figure3.

Exit codes: 0 success, 1 computational failure (JSON error on stderr),
2 usage or invalid input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .process import DomainError, ValidationError
from .solver import SolveConfig, SolverError, solve_partial, solve_q
from .subsets import SubsetSpec, union
from .family import (EnumerationOverflow, FamilyGraph, class_of_primitive, decompose,
                     detect_ascending_chains, enumerate_classes_bruteforce, family_graph_from_relations,
                     graph_from_json, primitive_subsets, upward_closure)
from .relations import SYMBOL, Kind, check_family_conditions, relation_matrix
from .montecarlo import EVENTS, MCConfig, estimate_event, estimate_extinction
from .specio import load_spec, parse_subset, parse_type, parse_types, spec_from_json, _fix

FIG3_R = (0.05, 0.08, 0.1, 0.15, 0.2, 0.3, 0.32, 0.4, 0.47, 0.5, 0.57, 0.6, 0.64, 0.8, 1.0)
# windows up to 32768 types; the level process needs large windows near its thresholds
FIG3_SCHEDULE = tuple(16 * 2 ** m for m in range(12))
DISTINCT_TOL = 1e-3
SENSITIVITY_TOLS = (1e-4, 1e-2)


class ComputationFailure(RuntimeError):
    def __init__(self, payload):
        super().__init__(payload.get("error", "computation failed"))
        self.payload = payload


def _dump(obj, out=None):
    text = json.dumps(obj, indent=2, default=_default)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    return str(o)


def _jt(t):
    return list(t) if isinstance(t, tuple) else t


def _cfg(args) -> SolveConfig:
    cfg = SolveConfig.from_file(args.config) if getattr(args, "config", None) else SolveConfig()
    kw = {}
    if getattr(args, "window", None):
        kw["window_schedule"] = tuple(n for n in FIG3_SCHEDULE if n < args.window) + (args.window,)
    if getattr(args, "tol", None):
        kw["trunc_tol"] = args.tol
    if getattr(args, "method", None):
        kw["method"] = args.method
    return cfg.replace(**kw) if kw else cfg


def _load_process(args):
    if args.spec:
        return load_spec(args.spec)
    if args.example == "example2":
        return spec_from_json({"builtin": "example2"})
    return spec_from_json({"builtin": "example1", "p": args.p, "q": args.q, "r": args.r})


# ---------------------------------------------------------------------------

def cmd_solve(args):
    spec, named = _load_process(args)
    cfg = _cfg(args)
    if args.partial:
        res = solve_partial(spec, cfg)
    else:
        res = solve_q(spec, parse_subset(args.subset, named), cfg)
    out = res.to_json()
    if args.types:
        types = parse_types(args.types)
        bad = [t for t in types if t not in res.vector.window]
        if bad:
            raise ValidationError(f"types {bad} are outside the solved window")
        out["values"] = [[_jt(t), float(res[t])] for t in types]
    _dump(out, args.out)
    if not res.converged:
        raise ComputationFailure({"error": "solver did not stabilise", "residual": res.residual,
                                  "windows_used": res.windows_used})


def cmd_simulate(args):
    spec, named = _load_process(args)
    mc = MCConfig(trials=args.trials, horizon=args.horizon, population_cap=args.cap, seed=args.seed,
                  n_jobs=args.jobs)
    A = parse_subset(args.subset, named)
    x = parse_type(args.types) if args.types else spec.typeset.first(1)[0]
    if args.event == "extinction":
        est = estimate_extinction(spec, x, A, mc)
    else:
        B = parse_subset(args.B, named)
        est = estimate_event(spec, x, args.event, A, B, mc)
    out = {"initial": _jt(x), "event": args.event, "subset": A.name, **est.to_json(),
           "sigma": est.sigma, "seed": args.seed, "horizon": args.horizon, "cap": args.cap}
    if args.out and args.out.endswith(".csv"):
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(out))
            w.writerow([json.dumps(v) if isinstance(v, list) else v for v in out.values()])
    else:
        _dump(out, args.out)


# ---------------------------------------------------------------------------
# classify

def _fmt(I):
    s = "{" + ",".join(str(v) for v in I.sorted()) + "}"
    return s + ("+..." if I.extends else "")


def _graph_report(g: FamilyGraph, growth: FamilyGraph | None = None) -> dict:
    rep = {"vertices": [_jt(v) for v in g.vertices],
           "edges": [[_jt(a), _jt(b)] for a, b in g.edges()],
           "infinite": g.infinite}
    prim = primitive_subsets(g)
    rep["primitive_subsets"] = [_fmt(I) for I in prim]
    if not g.infinite:
        classes = []
        brute = {r.members: mem for r, mem in enumerate_classes_bruteforce(g)} if g.n <= 16 else None
        for I in prim:
            mem = brute[I.members] if brute is not None else class_of_primitive(g, I)
            classes.append({"primitive": _fmt(I), "closure": _fmt(upward_closure(g, I)),
                            "members": [_fmt(J) for J in mem]})
        rep["classes"] = classes
        rep["ext_size"] = len(prim)
        rep["ext_structure"] = "finite: one distinct extinction vector per primitive subset"
    else:
        ch = detect_ascending_chains(g, growth) if growth is not None else None
        rep["ext_structure"] = ("window of an infinite family: primitive subsets of the window are "
                                "shown; ascending chains "
                                + (ch.verdict if ch else "not assessed (single window)"))
        rep["signatures"] = [{"I": _fmt(I), "I_M": _fmt(decompose(g, I).i_m)} for I in prim]
    return rep


def _print_graph_report(rep):
    print("primitive subsets:", " ".join(rep["primitive_subsets"]))
    if "classes" in rep:
        print(f"{'primitive':<12} {'I+':<14} class members")
        for c in rep["classes"]:
            print(f"{c['primitive']:<12} {c['closure']:<14} {' '.join(c['members'])}")
        print(f"|Ext| = {rep['ext_size']}")
    print(rep["ext_structure"])


def _family_from_process(data, args):
    spec, named = spec_from_json(data["spec"])
    cfg = _cfg(args)
    subs = data["subsets"]
    items = list(subs.items()) if isinstance(subs, dict) else [(f"A{i + 1}", s) for i, s in enumerate(subs)]
    specs = []
    for name, s in items:
        if isinstance(s, str):
            ss = parse_subset(s, named)
            specs.append(SubsetSpec(name, ss.member, ss.known_finite, ss.elements))
        else:
            specs.append(SubsetSpec.of([_fix(t) for t in s], name=name))
    solved = [solve_q(spec, A, cfg) for A in specs]
    failed = [A.name for A, r in zip(specs, solved) if not r.converged]
    if failed:
        raise ComputationFailure({"error": "solver did not stabilise", "subsets": failed})
    tol = args.tol_rel

    def union_solver(idx, tail):
        return solve_q(spec, union([specs[i] for i in idx]), cfg)

    report = check_family_conditions(specs, solved, tol=tol, union_solver=union_solver)
    names = [A.name for A in specs]
    rel = report.relations
    out = {"relations": {"names": names, "matrix": [[r.symbol for r in row] for row in rel]},
           "regularity": report.to_json()}
    if report.verdicts["C3"] != "pass" or any(r.kind is Kind.INDETERMINATE for row in rel for r in row):
        out["note"] = "family is not regular on this window; graph analysis skipped"
        return out, None
    g = family_graph_from_relations(names, [[r.kind is Kind.IMPLIES for r in row] for row in rel])
    return out, g


def cmd_classify(args):
    growth = None
    out = {}
    if args.family:
        with open(args.family) as fh:
            data = json.load(fh)
        if "spec" in data:
            out, g = _family_from_process(data, args)
        else:
            g = graph_from_json(data)
    else:
        from . import examples as ex
        n = args.n
        if args.example == "figure1":
            g = ex.figure1_graph()
        elif args.example == "figure2":
            g, growth = ex.figure2_graph(n), ex.figure2_graph(2 * n)
        elif args.example == "figure3":
            g, growth = ex.figure3_graph(n), ex.figure3_graph(2 * n)
        elif args.example == "example2":
            g, growth = ex.example2_graph(n), ex.example2_graph(n + 1)
        else:
            g, growth = ex.build_example3_graph(n), ex.build_example3_graph(n + 1)
    if g is not None:
        out["graph"] = _graph_report(g, growth)
    if args.json:
        _dump(out, args.out)
        return
    if "relations" in out:
        names = out["relations"]["names"]
        w = max(len(n) for n in names) + 1
        print(" " * w + " ".join(f"{n:>{w}}" for n in names))
        for n, row in zip(names, out["relations"]["matrix"]):
            print(f"{n:<{w}}" + " ".join(f"{s:>{w}}" for s in row))
        print("regularity:", json.dumps(out["regularity"]["verdicts"]))
        if "note" in out:
            print(out["note"])
    if "graph" in out:
        _print_graph_report(out["graph"])
    if args.out:
        _dump(out, args.out)


# ---------------------------------------------------------------------------
# level sweep

def _fig3_point(task):
    """All levels for one r.  Returns rows (r, level, value, converged, residual)."""
    from .examples import Example1Params, build_example1

    r, p, q, levels, cfg = task
    spec, L, _ = build_example1(Example1Params(p, q, r), levels=levels + 1)
    rows = []
    for i in range(1, levels + 1):
        try:
            res = solve_q(spec, L[i], cfg)
            rows.append((r, i, float(res[(0, 0)]), bool(res.converged), float(res.residual)))
        except (SolverError, FloatingPointError) as exc:
            rows.append((r, i, float("nan"), False, float(getattr(exc, "residual", None) or "nan")))
    return rows


def distinct_count(values, tol=DISTINCT_TOL) -> int:
    """Clusters of the sorted values split at gaps larger than tol."""
    v = np.sort(np.asarray([x for x in values if np.isfinite(x)]))
    if not len(v):
        return 0
    return 1 + int(np.sum(np.diff(v) > tol))


def expected_count(r, p, levels) -> int:
    return min(sum(1 for i in range(1, levels + 1) if r > p ** (1.0 / i)) + 1, levels)


def _g(x):
    return repr(float(x))


def run_figure3(r_values, p=0.1, q=0.5, levels=6, cfg: SolveConfig | None = None, jobs=1):
    """Returns (rows, summary) in the order of r_values."""
    cfg = cfg or SolveConfig(window_schedule=FIG3_SCHEDULE)
    tasks = [(float(r), p, q, levels, cfg) for r in r_values]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            parts = list(ex.map(_fig3_point, tasks))
    else:
        parts = [_fig3_point(t) for t in tasks]
    rows = [row for part in parts for row in part]
    summary = []
    for r, part in zip(r_values, parts):
        vals = [row[2] for row in part]
        summary.append((float(r), distinct_count(vals, DISTINCT_TOL),
                        *[distinct_count(vals, t) for t in SENSITIVITY_TOLS],
                        expected_count(r, p, levels), all(row[3] for row in part)))
    return rows, summary


def write_figure3(rows, summary, out):
    """Main CSV plus <stem>_summary.csv next to it.  Returns the two texts."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "level", "q_value", "converged", "residual"])
    for r, i, v, ok, res in rows:
        w.writerow([_g(r), i, _g(v), str(ok).lower(), _g(res)])
    sbuf = io.StringIO()
    w = csv.writer(sbuf, lineterminator="\n")
    w.writerow(["r", f"distinct_{DISTINCT_TOL:g}"] + [f"distinct_{t:g}" for t in SENSITIVITY_TOLS]
               + ["expected", "all_converged"])
    for r, d, *rest, exp, ok in summary:
        w.writerow([_g(r), d, *rest, exp, str(ok).lower()])
    texts = buf.getvalue(), sbuf.getvalue()
    if out:
        stem = out[:-4] if out.endswith(".csv") else out
        with open(stem + ".csv", "w", newline="") as fh:
            fh.write(texts[0])
        with open(stem + "_summary.csv", "w", newline="") as fh:
            fh.write(texts[1])
    return texts


def cmd_figure3(args):
    if args.r_list:
        rs = [float(x) for x in args.r_list.split(",") if x.strip()]
    elif args.r is not None:
        rs = [args.r]
    else:
        rs = list(FIG3_R)
    if not rs or any(r <= 0 for r in rs):
        raise ValidationError("r values must be positive")
    cfg = SolveConfig(window_schedule=FIG3_SCHEDULE)
    if args.config:
        cfg = SolveConfig.from_file(args.config)
    if args.window:
        cfg = cfg.replace(window_schedule=tuple(n for n in FIG3_SCHEDULE if n < args.window) + (args.window,))
    if args.tol:
        cfg = cfg.replace(trunc_tol=args.tol)
    rows, summary = run_figure3(rs, args.p, args.q, args.levels, cfg, args.jobs)
    main, summ = write_figure3(rows, summary, args.out)
    if not args.out:
        sys.stdout.write(main)
        sys.stdout.write("\n" + summ)
    bad = [s[0] for s in summary if not s[-1]]
    if bad:
        print(json.dumps({"warning": "some points did not stabilise", "r": bad}), file=sys.stderr)


# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="extprob", description="Extinction probabilities of multitype "
                                 "branching processes on countable typesets")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def process_args(sp):
        sp.add_argument("--spec", help="JSON process spec file")
        sp.add_argument("--example", choices=["example1", "example2"], default="example1",
                        help="built-in process when --spec is not given")
        sp.add_argument("--p", type=float, default=0.1)
        sp.add_argument("--q", type=float, default=0.5)
        sp.add_argument("--r", type=float, default=1.0)
        sp.add_argument("--out", help="write the output here instead of stdout (simulate: .csv gives a CSV row)")

    sp = sub.add_parser("solve", help="q(A) on the reporting window")
    process_args(sp)
    sp.add_argument("--subset", default="X", help="X, none, a named subset (L1, P0, L1|L2) or a list of types")
    sp.add_argument("--partial", action="store_true", help="partial extinction vector q~ instead of q(A)")
    sp.add_argument("--types", help="types to print, e.g. '0,1' or '(0,0);(1,0)'")
    sp.add_argument("--window", type=int, help="largest truncation window")
    sp.add_argument("--tol", type=float, help="truncation stability tolerance")
    sp.add_argument("--method", choices=["two-phase", "minimal"])
    sp.add_argument("--config", help="key=value solver config file")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("classify", help="relations, regularity, primitive subsets and classes")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--family", help="JSON: graph {vertices, implies} or {spec, subsets}")
    src.add_argument("--example", choices=["figure1", "figure2", "figure3", "example2", "example3"])
    sp.add_argument("--n", type=int, default=6, help="window size for infinite examples")
    sp.add_argument("--tol", dest="tol_rel", type=float, default=1e-4, help="relation tolerance")
    sp.add_argument("--window", type=int)
    sp.add_argument("--config")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_classify, method=None, tol=None)

    sp = sub.add_parser("simulate", help="Monte Carlo estimates")
    process_args(sp)
    sp.add_argument("--subset", default="X")
    sp.add_argument("--B", help="second subset for two-set events")
    sp.add_argument("--event", choices=("extinction",) + EVENTS, default="extinction")
    sp.add_argument("--types", help="initial type")
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--horizon", type=int, default=200)
    sp.add_argument("--cap", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("figure3", help="q_(0,0)(L_i) against r for the level process, as CSV")
    sp.add_argument("--p", type=float, default=0.1)
    sp.add_argument("--q", type=float, default=0.5)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--r", type=float)
    g.add_argument("--r-list", help="comma separated r values")
    sp.add_argument("--levels", type=int, default=6)
    sp.add_argument("--window", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--trials", type=int, help="unused (no simulation in the sweep)")
    sp.add_argument("--seed", type=int, default=0, help="unused; the sweep is deterministic")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--config")
    sp.add_argument("--out", help="CSV path; a _summary.csv is written next to it")
    sp.set_defaults(func=cmd_figure3)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ComputationFailure as exc:
        print(json.dumps(exc.payload, default=_default), file=sys.stderr)
        return 1
    except (SolverError, EnumerationOverflow) as exc:
        payload = exc.to_json() if hasattr(exc, "to_json") else {"error": str(exc)}
        print(json.dumps(payload, default=_default), file=sys.stderr)
        return 1
    except (ValidationError, DomainError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
