"""Implication relations between subsets of types.

A => B (survival in A implies survival in B) holds iff q(A) >= q(B)
entrywise.  Numerically the comparison is only ever made on a finite
window, so verdicts are window verdicts.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .process import ProbVector, ValidationError, Window
from .solver import SolveConfig, _as_window, solve_q0, solve_qXA
from .montecarlo import MCConfig, estimate_event


class Kind(enum.Enum):
    IMPLIES = "=>"
    IMPLIED_BY = "<="
    EQUIVALENT = "<=>"
    INCOMPARABLE = "<=/=>"
    INDETERMINATE = "?"

    def swap(self):
        return {Kind.IMPLIES: Kind.IMPLIED_BY, Kind.IMPLIED_BY: Kind.IMPLIES}.get(self, self)


SYMBOL = {Kind.IMPLIES: "⇒", Kind.IMPLIED_BY: "⇐", Kind.EQUIVALENT: "⇔",
          Kind.INCOMPARABLE: "⇎", Kind.INDETERMINATE: "?"}


@dataclass
class Relation:
    kind: Kind
    evidence: dict = field(default_factory=dict)

    @property
    def symbol(self):
        return SYMBOL[self.kind]

    def to_json(self):
        return {"kind": self.kind.name, "symbol": self.symbol, "evidence": self.evidence}


def _key(t):
    return list(t) if isinstance(t, tuple) else t


def compare_extinction_vectors(qA: ProbVector, qB: ProbVector, tol=1e-4, uncertainty=0.0) -> Relation:
    """Window verdict for A vs B from the two extinction vectors.

    A difference larger than tol + uncertainty is decisive; one in
    (tol, tol + uncertainty] is not, and can leave the verdict open."""
    if qA.window != qB.window:
        raise ValidationError("vectors live on different windows")
    d = qA.values - qB.values
    pos, neg = float(d.max(initial=0.0)), float((-d).max(initial=0.0))
    ev = {"criterion": "(i) coordinatewise comparison of q(A) and q(B)",
          "max_qA_minus_qB": pos, "max_qB_minus_qA": neg, "tol": tol, "uncertainty": uncertainty}
    if len(d):
        ev["argmax_qA_minus_qB"] = _key(qA.window.types[int(np.argmax(d))])
        ev["argmax_qB_minus_qA"] = _key(qA.window.types[int(np.argmax(-d))])
    if max(pos, neg) <= tol:
        return Relation(Kind.EQUIVALENT, ev)
    dec = tol + uncertainty
    if pos > dec and neg > dec:
        return Relation(Kind.INCOMPARABLE, ev)
    if pos > dec and neg <= tol:
        return Relation(Kind.IMPLIES, ev)
    if neg > dec and pos <= tol:
        return Relation(Kind.IMPLIED_BY, ev)
    return Relation(Kind.INDETERMINATE, ev)


@dataclass
class RatioInfimum:
    value: float | None   # None when no type is eligible
    argmin: object
    eligible: int


def ratio_infimum(qA: ProbVector, qB: ProbVector, window=None) -> RatioInfimum:
    """Windowed inf of (1 - q_x(B)) / (1 - q_x(A)) over x with q_x(A) < 1.

    A value near 0 (or a downward trend over growing windows) is evidence
    that q(A) < q(B) somewhere; a windowed value is never a certificate."""
    if window is None:
        window = qA.window
    elif isinstance(window, int):
        window = qA.window.head(window)
    best, arg, cnt = math.inf, None, 0
    for x in window:
        a = qA[x]
        if a >= 1 - 1e-12:
            continue
        cnt += 1
        v = (1 - qB[x]) / (1 - a)
        if v < best:
            best, arg = v, x
    if cnt == 0:
        return RatioInfimum(None, None, 0)
    return RatioInfimum(best, arg, cnt)


@dataclass
class SingletonResult:
    singleton: bool
    gap: float
    argmax: object

    def __bool__(self):
        return self.singleton


def singleton_test(spec, B, window, cfg: SolveConfig | None = None) -> SingletonResult:
    """Is the fixed-point set of the map with B forced to 0 a singleton?
    Decided by the gap between its maximal and minimal elements, measured on
    the reporting window (the head of `window`)."""
    cfg = cfg or SolveConfig()
    window = _as_window(spec, window)
    hi = solve_q0(spec, B, window, cfg)
    lo = solve_qXA(spec, B, window, cfg)
    n = min(cfg.report_size, len(window))
    gap = hi.values[:n] - lo.values[:n]
    k = int(np.argmax(gap))
    g = float(gap[k])
    return SingletonResult(g <= 2 * cfg.inner_tol, g, window.types[k])


def mc_relation_check(spec, x, A, B, mc: MCConfig | None = None):
    """Estimate of P_x(survival in A and extinction in B)."""
    return estimate_event(spec, x, "survive_A_extinct_B", A, B, mc)


# ---------------------------------------------------------------------------

PASS, FAIL, ADV_PASS, ADV_FAIL, SKIPPED = "pass", "fail", "advisory-pass", "advisory-fail", "not checked"


@dataclass
class RegularityReport:
    verdicts: dict
    details: dict
    relations: list  # matrix of Relation

    @property
    def regular_up_to_advisory(self):
        return all(self.verdicts[c] == PASS for c in ("C1", "C2", "C3")) and \
            all(self.verdicts[c] in (ADV_PASS, SKIPPED) for c in ("C4", "C5"))

    def to_json(self):
        return {"verdicts": self.verdicts, "details": self.details,
                "relations": [[r.symbol for r in row] for row in self.relations],
                "note": "C4 and C5 quantify over infinitely many unions in general; "
                        "they are checked only on unions visible in the finite projection"}


def relation_matrix(vectors, tol=1e-4, uncertainty=0.0):
    n = len(vectors)
    return [[Relation(Kind.EQUIVALENT, {"criterion": "reflexive"}) if i == j else
             compare_extinction_vectors(vectors[i], vectors[j], tol, uncertainty)
             for j in range(n)] for i in range(n)]


def _implies(rel: Relation):
    return rel.kind in (Kind.IMPLIES, Kind.EQUIVALENT)


def check_family_conditions(specs, solved, window=None, tol=1e-4, trunc_tol=1e-8,
                            union_solver=None, infinite_tail=False, max_members=6) -> RegularityReport:
    """Regularity checks for a family {A_i} with solved q(A_i).

    union_solver(indices, tail) -> ProbVector of q(union) on the common
    window, where tail=True also includes the members beyond the listed
    ones (for windows of infinite families).  Without it C4/C5 are skipped.
    """
    if len(specs) != len(solved):
        raise ValidationError("one solved vector per subset is needed")
    # compare on reporting windows: full solve windows differ between subsets
    vecs = [getattr(s, "report", s) for s in solved]
    if window is None:
        n = min(len(v.window) for v in vecs)
        window = vecs[0].window.head(n)
    vecs = [v.restrict(window) for v in vecs]
    K = len(specs)
    verdicts, details = {}, {}

    overlaps = [(specs[i].name, specs[j].name) for i in range(K) for j in range(i + 1, K)
                if any(t in specs[i] and t in specs[j] for t in window)]
    verdicts["C1"] = FAIL if overlaps else PASS
    details["C1"] = {"overlapping_pairs": overlaps, "window": len(window)}

    trivial = [specs[i].name for i in range(K) if vecs[i].values.min() > 1 - 10 * trunc_tol]
    verdicts["C2"] = FAIL if trivial else PASS
    details["C2"] = {"q_equal_to_one": trivial}

    rel = relation_matrix(vecs, tol)
    eq = [(specs[i].name, specs[j].name) for i in range(K) for j in range(i + 1, K)
          if rel[i][j].kind is Kind.EQUIVALENT]
    verdicts["C3"] = FAIL if eq else PASS
    details["C3"] = {"equivalent_pairs": eq}
    undecided = [(specs[i].name, specs[j].name) for i in range(K) for j in range(K)
                 if rel[i][j].kind is Kind.INDETERMINATE]
    if undecided:
        details["indeterminate_pairs"] = undecided

    if union_solver is None or K > max_members:
        verdicts["C4"] = verdicts["C5"] = SKIPPED
        return RegularityReport(verdicts, details, rel)

    cache = {}

    def q_union(I, tail=False):
        key = (tuple(sorted(I)), tail)
        if key not in cache:
            v = union_solver(key[0], tail)
            cache[key] = getattr(v, "report", v).restrict(window)
        return cache[key]

    bad4 = []
    for r in range(1, K + 1):
        for I in itertools.combinations(range(K), r):
            qa = q_union(I)
            IA = [i for i in range(K) if _implies(compare_extinction_vectors(vecs[i], qa, tol))]
            if IA and not _implies(compare_extinction_vectors(q_union(IA), qa, tol)):
                bad4.append([specs[i].name for i in I])
    verdicts["C4"] = ADV_FAIL if bad4 else ADV_PASS
    details["C4"] = {"violating_unions": bad4}

    bad5 = []
    for i in range(K):
        J = [j for j in range(K) if j != i and not _implies(rel[i][j])]
        if not J and not infinite_tail:
            continue
        qu = q_union(J, infinite_tail)
        if _implies(compare_extinction_vectors(vecs[i], qu, tol)):
            bad5.append(specs[i].name)
    verdicts["C5"] = ADV_FAIL if bad5 else ADV_PASS
    details["C5"] = {"members_implying_their_cotail": bad5, "tail_included": infinite_tail}
    return RegularityReport(verdicts, details, rel)
