"""Extinction probability vectors by truncated functional iteration.

All iterations run on u = 1 - s.  On a finite window the process is
modified at the boundary: children outside the window that belong to A are
immortal (u = 1, they survive in A forever) and the others are sterile
(u = 0).  Inside the window, A-types past the k-th and complement types past
the l'-th can be frozen the same way.

Two inner methods are available on a truncated system:

  two-phase  u0 = P(visit A) from below (maximal fixed point of the modified
             map in s-coordinates), then u <- H(u) from u0.  This is the
             generation recursion started at q^(0)(A); on a finite system it
             converges to q(A) of that system, also for reducible processes.
  minimal    minimal fixed point in s (iterate from s = 0).  Converges to
             q(A) under irreducibility only.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .process import (CompiledSystem, ProbVector, ProcessSpec, ValidationError, Window,
                      irreducible_classes, is_non_singular)
from .subsets import SubsetSpec


class SolverError(RuntimeError):
    """Non-convergence.  Carries the last iterate and diagnostics."""

    def __init__(self, msg, last=None, residual=None, log=None):
        super().__init__(msg)
        self.last = last
        self.residual = residual
        self.log = log or []

    def to_json(self):
        return {"error": str(self), "residual": self.residual, "log": self.log}


@dataclass(frozen=True)
class SolveConfig:
    inner_tol: float = 1e-12
    trunc_tol: float = 1e-8
    window_schedule: tuple = tuple(16 * 2 ** m for m in range(7))
    max_inner_iters: int = 200_000
    joint_schedule: bool = True
    fallback_nested: bool = True
    report_size: int = 16
    rel_tol: float = 1e-10
    rel_floor: float = 1e-100
    method: str = "two-phase"

    def __post_init__(self):
        if self.inner_tol <= 0 or self.trunc_tol <= 0 or self.rel_tol <= 0:
            raise ValidationError("tolerances must be positive")
        sch = tuple(int(n) for n in self.window_schedule)
        if not sch or any(b <= a for a, b in zip(sch, sch[1:])) or sch[0] < 1:
            raise ValidationError("window_schedule must be strictly increasing and positive")
        object.__setattr__(self, "window_schedule", sch)
        if self.method not in ("two-phase", "minimal"):
            raise ValidationError(f"unknown method {self.method}")

    def replace(self, **kw):
        return replace(self, **kw)

    @classmethod
    def from_file(cls, path):
        """key=value lines; '#' comments; schedule as comma list."""
        kw = {}
        types = {f: type(getattr(cls(), f)) for f in cls.__dataclass_fields__}
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in types:
                raise ValidationError(f"unknown config key {key!r}")
            t = types[key]
            if t is tuple:
                kw[key] = tuple(int(v) for v in val.split(",") if v.strip())
            elif t is bool:
                kw[key] = val.lower() in ("1", "true", "yes", "on")
            else:
                kw[key] = t(float(val)) if t is int else t(val)
        return cls(**kw)


@dataclass
class ExtinctionResult:
    vector: ProbVector
    residual: float
    iterations_used: int
    windows_used: list
    converged: bool
    monotonicity_log: list
    subset: str = ""
    method: str = "two-phase"
    advisory: list = field(default_factory=list)
    report_size: int = 16

    @property
    def report(self) -> ProbVector:
        w = self.vector.window.head(self.report_size)
        return self.vector.restrict(w)

    def __getitem__(self, t):
        return self.vector[t]

    def to_json(self, full=False):
        vec = self.vector if full else self.report
        return {
            "subset": self.subset,
            "method": self.method,
            "converged": self.converged,
            "residual": self.residual,
            "iterations_used": self.iterations_used,
            "windows_used": self.windows_used,
            "advisory": self.advisory,
            "monotonicity_log": self.monotonicity_log,
            "values": [[_jsonable(t), float(v)] for t, v in zip(vec.window.types, vec.values)],
        }


def _jsonable(t):
    return list(t) if isinstance(t, tuple) else t


# ---------------------------------------------------------------------------
# inner iteration

def _iterate(sysm, u, free, cfg, direction=0):
    """u <- H(u) on the `free` coordinates until the change is small both in
    absolute and relative terms.  Returns (u, iterations, converged, worst)
    where worst is the largest step against `direction` (+1: u should only
    grow, -1: only shrink)."""
    abs_tol = cfg.inner_tol / 10
    worst = 0.0
    u = u.copy()
    if not free.any():
        return u, 0, True, 0.0
    for it in range(1, cfg.max_inner_iters + 1):
        h = sysm.H(u)
        d = h[free] - u[free]
        if direction:
            worst = max(worst, float(np.max(-direction * d)))
        u[free] = h[free]
        ad = np.abs(d)
        if ad.max() <= abs_tol and (ad / np.maximum(h[free], cfg.rel_floor)).max() <= cfg.rel_tol:
            return u, it, True, worst
    return u, cfg.max_inner_iters, False, worst


def _compile(spec, window: Window, A: SubsetSpec, outside_A=1.0, outside_B=0.0):
    return CompiledSystem(spec, window.types, window.index,
                          lambda y: outside_A if y in A else outside_B)


def _frozen(window, inA, k, lprime):
    """Immortal A-types (label >= k) and sterile complement types (label >= l')."""
    n = len(window)
    fixed = np.zeros(n, bool)
    vals = np.zeros(n)
    if k is not None:
        ia = np.flatnonzero(inA)
        fixed[ia[k:]] = True
        vals[ia[k:]] = 1.0
    if lprime is not None:
        ic = np.flatnonzero(~inA)
        fixed[ic[lprime:]] = True
        vals[ic[lprime:]] = 0.0
    return fixed, vals


def _solve_truncated(spec, A, window, k, lprime, cfg, method=None, sysm=None):
    """q^(k,l')(A) on a window in u-coordinates, plus diagnostics."""
    method = method or cfg.method
    inA = np.array([t in A for t in window.types], bool)
    if sysm is None:
        sysm = _compile(spec, window, A)
    fixed, vals = _frozen(window, inA, k, lprime)
    live = ~fixed
    u = vals.copy()
    info = {"iterations": 0, "worst_step": 0.0}
    if method == "two-phase":
        u[inA & live] = 1.0
        u, it1, ok1, _ = _iterate(sysm, u, live & ~inA, cfg, direction=+1)
        u, it2, ok2, worst = _iterate(sysm, u, live, cfg, direction=-1)
        info.update(iterations=it1 + it2, converged=ok1 and ok2, worst_step=worst)
    else:
        u[live] = 1.0
        u, it, ok, worst = _iterate(sysm, u, live, cfg, direction=-1)
        info.update(iterations=it, converged=ok, worst_step=worst)
    h = sysm.H(u)
    info["residual"] = float(np.max(np.abs(h[live] - u[live]))) if live.any() else 0.0
    return u, info


def solve_finite_modified(spec, A: SubsetSpec, k: int, lprime: int, window, cfg=None,
                          method="minimal") -> ProbVector:
    """q^(k,l')(A): A-types after the first k and complement types after the
    first l' (in enumeration order) are immortal and sterile respectively.
    Uses the minimal fixed point by default."""
    cfg = cfg or SolveConfig()
    window = _as_window(spec, window)
    inA = np.array([t in A for t in window.types], bool)
    if k > inA.sum() or lprime > (~inA).sum():
        raise ValidationError("window does not cover the first k A-types and l' complement types")
    u, info = _solve_truncated(spec, A, window, k, lprime, cfg, method)
    if not info["converged"]:
        raise SolverError("inner iteration did not converge", ProbVector(window, 1 - u), info["residual"])
    return ProbVector(window, 1.0 - u)


def _as_window(spec, window):
    if isinstance(window, Window):
        return window
    return spec.window(window)


def _schedule(spec, cfg):
    if spec.finite:
        n = spec.typeset.size
        sch = [m for m in cfg.window_schedule if m < n] + [n]
        return sch
    # windows smaller than the reporting window cannot be compared on it
    sch = [m for m in cfg.window_schedule if m >= cfg.report_size]
    return sch or [cfg.report_size]


def solve_q(spec: ProcessSpec, A: SubsetSpec, cfg: SolveConfig | None = None) -> ExtinctionResult:
    """q(A) through growing truncations until the reporting window is stable."""
    cfg = cfg or SolveConfig()
    if A.is_empty:
        w = spec.window(min(cfg.report_size, spec.typeset.size) if spec.finite else cfg.report_size)
        return ExtinctionResult(ProbVector.constant(w, 1.0), 0.0, 0, [], True, [],
                                A.name, cfg.method, [], cfg.report_size)
    sch = _schedule(spec, cfg)
    advisory = []
    if cfg.method == "minimal":
        big = spec.window(sch[-1])
        if len(irreducible_classes(spec, big)) > 1:
            advisory.append("process reducible on the largest window: minimal fixed point "
                            "of the truncated map need not approach q(A)")
    if cfg.joint_schedule:
        res = _solve_coupled(spec, A, sch, cfg)
        if not res.converged and cfg.fallback_nested and not spec.finite:
            res2 = _solve_nested(spec, A, sch, cfg)
            res2.advisory.append("coupled k=l' schedule did not stabilise; nested limits used")
            res2.monotonicity_log = res.monotonicity_log + res2.monotonicity_log
            res = res2
    else:
        res = _solve_nested(spec, A, sch, cfg)
    if not spec.finite:
        advisory.append("truncation stability is a heuristic stopping rule, not an error bound")
    res.advisory = advisory + res.advisory
    return res


def _result(spec, A, window, u, info, log, windows, cfg, converged, iters):
    vec = ProbVector(window, 1.0 - u)
    return ExtinctionResult(vec, info["residual"], iters, windows,
                            bool(converged and info["residual"] <= cfg.inner_tol),
                            log, A.name, cfg.method, [], cfg.report_size)


def _solve_coupled(spec, A, sch, cfg):
    prev = None
    log, windows = [], []
    iters = 0
    u = info = window = None
    stable = False
    for N in sch:
        window = spec.window(N)
        u, info = _solve_truncated(spec, A, window, None, None, cfg)
        iters += info["iterations"]
        rep = 1.0 - u[:cfg.report_size]
        exact = spec.finite and N >= spec.typeset.size
        delta = 0.0 if exact else (math.inf if prev is None else float(np.max(np.abs(rep - prev))))
        windows.append(N)
        log.append({"mode": "coupled", "window": N, "delta": delta, "iterations": info["iterations"],
                    "residual": info["residual"], "worst_step": info["worst_step"],
                    "inner_converged": info["converged"]})
        if delta <= cfg.trunc_tol and info["converged"]:
            if exact or _boundary_ok(spec, A, window, windows[-2], rep, log, cfg):
                stable = True
                break
            # accidental agreement: keep growing the window
        prev = rep
    return _result(spec, A, window, u, info, log, windows, cfg, stable, iters)


def _boundary_ok(spec, A, window, n_prev, rep, log, cfg):
    """Two coupled windows can agree by accident (e.g. when a deterministic
    line leaves the window alternately through immortal and sterile types).
    Re-solve on the same window with the A-types beyond the previous window
    immortal; a coupled limit must not notice the difference."""
    k = sum(1 for t in spec.window(n_prev) if t in A)
    u2, info2 = _solve_truncated(spec, A, window, k, None, cfg)
    d = float(np.max(np.abs((1.0 - u2[:cfg.report_size]) - rep)))
    ok = d <= cfg.trunc_tol and info2["converged"]
    log.append({"mode": "boundary-check", "window": len(window), "k": k, "delta": d,
                "iterations": info2["iterations"], "passed": ok})
    return ok


def _solve_nested(spec, A, sch, cfg):
    """Outer limit in k, inner limit in l'.  Expensive; used as fallback."""
    log, windows = [], []
    iters = 0
    outer_prev = None
    stable = False
    agree = 0
    u = info = window = None
    for a, Na in enumerate(sch):
        k = sum(1 for t in spec.window(Na) if t in A)
        inner_prev = None
        inner_ok = False
        for Nb in sch[a:]:
            window = spec.window(Nb)
            u, info = _solve_truncated(spec, A, window, k, None, cfg)
            iters += info["iterations"]
            rep = 1.0 - u[:cfg.report_size]
            d = math.inf if inner_prev is None else float(np.max(np.abs(rep - inner_prev)))
            if spec.finite and Nb >= spec.typeset.size:
                d = 0.0
            log.append({"mode": "nested", "k": k, "window": Nb, "delta": d,
                        "iterations": info["iterations"], "residual": info["residual"],
                        "worst_step": info["worst_step"]})
            windows.append(Nb)
            inner_prev = rep
            if d <= cfg.trunc_tol:
                inner_ok = True
                break
        if not inner_ok:
            break
        if outer_prev is not None and float(np.max(np.abs(inner_prev - outer_prev))) <= cfg.trunc_tol:
            agree += 1
        else:
            agree = 0
        # two agreements in a row: a single one can be two degenerate early limits
        if agree >= 2:
            stable = True
            break
        if spec.finite and Na >= spec.typeset.size:
            stable = True
            break
        outer_prev = inner_prev
    return _result(spec, A, window, u, info, log, windows, cfg, stable, iters)


# ---------------------------------------------------------------------------
# extremal fixed points of the map with A forced to 0

def solve_q0(spec, A: SubsetSpec, window, cfg=None) -> ProbVector:
    """Probability of never visiting A: maximal fixed point, iterated from s = 1.
    Children outside the window count as visiting A iff they are in A."""
    cfg = cfg or SolveConfig()
    window = _as_window(spec, window)
    inA = np.array([t in A for t in window.types], bool)
    sysm = _compile(spec, window, A, 1.0, 0.0)
    u = inA.astype(float)
    u, it, ok, _ = _iterate(sysm, u, ~inA, cfg, direction=+1)
    if not ok:
        raise SolverError("q0 iteration did not converge", ProbVector(window, 1 - u))
    return ProbVector(window, 1.0 - u)


def solve_qXA(spec, A: SubsetSpec, window, cfg=None) -> ProbVector:
    """Probability of global extinction without visiting A: minimal fixed
    point, iterated from s = 0.  Children outside the window are treated as
    surviving (s = 0)."""
    cfg = cfg or SolveConfig()
    window = _as_window(spec, window)
    inA = np.array([t in A for t in window.types], bool)
    sysm = _compile(spec, window, A, 1.0, 1.0)
    u = np.ones(len(window))
    u, it, ok, _ = _iterate(sysm, u, ~inA, cfg, direction=-1)
    if not ok:
        raise SolverError("q(X,A) iteration did not converge", ProbVector(window, 1 - u))
    return ProbVector(window, 1.0 - u)


def solve_partial(spec, cfg=None) -> ExtinctionResult:
    """q~_x = q_x({x}) for every type x of the reporting window."""
    cfg = cfg or SolveConfig()
    first = spec.window(cfg.window_schedule[0] if not spec.finite else None)
    rep = is_non_singular(spec, first)
    if not rep:
        raise ValidationError(f"singular process: classes {rep.violating_classes}")
    advisory = []
    if len(irreducible_classes(spec, first)) > 1:
        advisory.append("process reducible on the first window")
    w = spec.window(min(cfg.report_size, spec.typeset.size) if spec.finite else cfg.report_size)
    vals, log, its, wins, res, ok = [], [], 0, [], 0.0, True
    for x in w:
        r = solve_q(spec, SubsetSpec.of([x]), cfg)
        vals.append(r.vector[x])
        its += r.iterations_used
        wins.append(r.windows_used[-1])
        res = max(res, r.residual)
        ok = ok and r.converged
        log.append({"type": _jsonable(x), "windows": r.windows_used, "converged": r.converged})
    return ExtinctionResult(ProbVector(w, vals), res, its, wins, ok, log, "partial",
                            cfg.method, advisory, cfg.report_size)


# ---------------------------------------------------------------------------

def residual(spec, s: ProbVector, window=None, outside_value: float = 1.0, subset=None) -> float:
    """sup |s - G(s)| over the window.  Children outside s.window read
    `outside_value`, or 0 / 1 according to membership in `subset`."""
    window = s.window if window is None else _as_window(spec, window)
    if subset is not None:
        out = lambda y: 1.0 if y in subset else 0.0
    else:
        out = lambda y: 1.0 - outside_value
    sysm = CompiledSystem(spec, window.types, s.window.index, out)
    g = 1.0 - sysm.H(1.0 - s.values)
    sv = np.array([s[t] for t in window])
    return float(np.max(np.abs(sv - g))) if len(sv) else 0.0


@dataclass
class UpperBoundReport:
    violations: list
    checked: int

    @property
    def ok(self):
        return not self.violations


def verify_upper_bound(spec, s: ProbVector, qtilde: ProbVector, tol=1e-8) -> UpperBoundReport:
    """Check that every coordinate of s is 1 or at most q_x({x}).

    The precondition s <= G(s) is checked on window rows whose children all
    lie in the window."""
    win = s.window
    sysm = CompiledSystem(spec, win.types, win.index, lambda y: math.nan)
    g = 1.0 - sysm.H(1.0 - s.values)
    for n, x in enumerate(win):
        if not np.isnan(g[n]) and s.values[n] > g[n] + tol:
            raise ValidationError(f"s > G(s) at {x!r}: {s.values[n]} > {g[n]}")
    bad = []
    count = 0
    for x in qtilde.window:
        if x not in win:
            continue
        count += 1
        sx = s[x]
        if sx < 1 - tol and sx > qtilde[x] + tol:
            bad.append((x, sx, qtilde[x]))
    return UpperBoundReport(bad, count)
