"""Branching process model: typesets, offspring laws, generating functions.

Types are hashable keys (ints, tuples of ints, tuples of +-1).  Every
typeset has a canonical enumeration so that a finite window is always an
initial segment of it.

Numerics are done in u = 1 - s ("survival") coordinates wherever possible,
since extinction probabilities of interest are often within 1e-12 of 1 and
geometric means can reach 1e300.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import networkx as nx
import numpy as np

TypeId = Hashable


class DomainError(ValueError):
    pass


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# typesets

class FiniteTypeset:
    def __init__(self, types: Sequence[TypeId]):
        self.types = tuple(types)
        self._index = {t: n for n, t in enumerate(self.types)}
        if len(self._index) != len(self.types):
            raise ValidationError("duplicate types in typeset")
        self.size = len(self.types)

    def __contains__(self, t):
        try:
            return t in self._index
        except TypeError:
            return False

    def index(self, t) -> int:
        try:
            return self._index[t]
        except (KeyError, TypeError):
            raise DomainError(f"unknown type {t!r}") from None

    def first(self, n: int) -> list:
        return list(self.types[:n])


class GridTypeset:
    """N_0 x N_0 in diagonal order: by level_weight*i + j, then i.

    level_weight=1 is the plain diagonal order.  Larger weights make windows
    long in the second coordinate and short in the first.
    """
    size = math.inf

    def __init__(self, level_weight: int = 1):
        if level_weight < 1:
            raise ValidationError("level_weight must be >= 1")
        self.w = int(level_weight)
        self._types: list = []
        self._d = -1

    def __contains__(self, t):
        return (isinstance(t, tuple) and len(t) == 2
                and all(isinstance(c, (int, np.integer)) and c >= 0 for c in t))

    def _grow(self, n):
        while len(self._types) < n:
            self._d += 1
            d = self._d
            self._types.extend((i, d - self.w * i) for i in range(d // self.w + 1))

    def first(self, n: int) -> list:
        self._grow(n)
        return self._types[:n]

    def index(self, t) -> int:
        if t not in self:
            raise DomainError(f"unknown type {t!r}")
        i, j = t
        d = self.w * i + j
        # number of types on diagonals < d
        w = self.w
        before = sum(dd // w + 1 for dd in range(d))
        return before + i


# ---------------------------------------------------------------------------
# count laws for a single child type.  Each knows its pgf, its mean and how
# to contribute log G in u-coordinates.

@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"Bernoulli p={self.p} outside [0,1]")

    def pgf(self, s):
        return (1.0 - self.p) + self.p * s

    @property
    def mean(self):
        return self.p

    def p0(self):
        return 1.0 - self.p

    def p1(self):
        return self.p


@dataclass(frozen=True)
class Deterministic:
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError("Deterministic count must be >= 0")

    def pgf(self, s):
        return s ** self.n

    @property
    def mean(self):
        return float(self.n)

    def p0(self):
        return 1.0 if self.n == 0 else 0.0

    def p1(self):
        return 1.0 if self.n == 1 else 0.0


@dataclass(frozen=True)
class Geometric:
    """Support {0,1,2,...}, P(n) = (1-th) th^n with th = m/(1+m).

    Stored through log(m) so that means like r**(-300) do not overflow.
    """
    log_mean: float

    @classmethod
    def with_mean(cls, m):
        if not m > 0:
            raise ValidationError("Geometric mean must be > 0")
        return cls(math.log(m))

    @property
    def mean(self):
        try:
            return math.exp(self.log_mean)
        except OverflowError:
            return math.inf

    @property
    def theta(self):
        # m/(1+m) without overflow
        return 1.0 / (1.0 + math.exp(-self.log_mean)) if self.log_mean > -700 else 0.0

    def pgf(self, s):
        return 1.0 / (1.0 + self.mean * (1.0 - s))

    def p0(self):
        return 1.0 - self.theta

    def p1(self):
        th = self.theta
        return (1.0 - th) * th


@dataclass(frozen=True)
class ExplicitFinite:
    pmf: tuple  # ((count, prob), ...)

    def __post_init__(self):
        tot = sum(p for _, p in self.pmf)
        if abs(tot - 1.0) > 1e-12 or any(p < 0 or k < 0 for k, p in self.pmf):
            raise ValidationError(f"bad finite pmf {self.pmf}")

    def pgf(self, s):
        return sum(p * s ** k for k, p in self.pmf)

    @property
    def mean(self):
        return sum(k * p for k, p in self.pmf)

    def p0(self):
        return sum(p for k, p in self.pmf if k == 0)

    def p1(self):
        return sum(p for k, p in self.pmf if k == 1)


CountLaw = Bernoulli | Deterministic | Geometric | ExplicitFinite


@dataclass(frozen=True)
class Component:
    child: TypeId
    law: CountLaw


@dataclass(frozen=True)
class IndependentProduct:
    components: tuple

    def __post_init__(self):
        kids = [c.child for c in self.components]
        if len(set(kids)) != len(kids):
            raise ValidationError("product components must target distinct child types")

    def children(self):
        return [c.child for c in self.components]

    def mean(self, y):
        for c in self.components:
            if c.child == y:
                return c.law.mean
        return 0.0


@dataclass(frozen=True)
class ExplicitJoint:
    """Outcomes are (prob, ((child, count), ...))."""
    outcomes: tuple

    def __post_init__(self):
        tot = 0.0
        for p, kids in self.outcomes:
            if p < 0:
                raise ValidationError("negative outcome probability")
            if any(n < 0 for _, n in kids):
                raise ValidationError("negative child count")
            tot += p
        if abs(tot - 1.0) > 1e-12:
            raise ValidationError(f"outcome probabilities sum to {tot}, not 1")

    def children(self):
        seen = {}
        for _, kids in self.outcomes:
            for y, n in kids:
                if n > 0:
                    seen[y] = None
        return list(seen)

    def mean(self, y):
        return sum(p * n for p, kids in self.outcomes for c, n in kids if c == y)


def explicit(outcomes) -> ExplicitJoint:
    """Convenience: outcomes as [(prob, {child: count} or [(child, count)])]."""
    out = []
    for p, kids in outcomes:
        items = kids.items() if isinstance(kids, dict) else kids
        merged: dict = {}
        for y, n in items:
            merged[y] = merged.get(y, 0) + int(n)
        out.append((float(p), tuple((y, n) for y, n in merged.items() if n > 0)))
    return ExplicitJoint(tuple(out))


def product(*components) -> IndependentProduct:
    return IndependentProduct(tuple(Component(y, law) for y, law in components))


# ---------------------------------------------------------------------------

class ProcessSpec:
    """A multitype Galton-Watson process: typeset plus law provider.

    law_of is memoised, so it must be deterministic.
    """

    def __init__(self, typeset, law_of: Callable, name: str = "process"):
        self.typeset = typeset
        self._law_of = law_of
        self.name = name
        self._cache: dict = {}

    @property
    def finite(self):
        return isinstance(self.typeset, FiniteTypeset)

    def law(self, x):
        try:
            return self._cache[x]
        except KeyError:
            pass
        if x not in self.typeset:
            raise DomainError(f"unknown type {x!r}")
        lw = self._law_of(x)
        self._cache[x] = lw
        return lw

    def window(self, n: int | None = None) -> "Window":
        if n is None:
            if not self.finite:
                raise ValidationError("infinite typeset needs an explicit window size")
            n = self.typeset.size
        if self.finite:
            n = min(n, self.typeset.size)
        return Window(tuple(self.typeset.first(n)))

    def __repr__(self):
        return f"ProcessSpec({self.name!r})"


class Window:
    def __init__(self, types):
        self.types = tuple(types)
        self.index = {t: n for n, t in enumerate(self.types)}

    def __len__(self):
        return len(self.types)

    def __iter__(self):
        return iter(self.types)

    def __contains__(self, t):
        return t in self.index

    def __eq__(self, other):
        return isinstance(other, Window) and self.types == other.types

    def __hash__(self):
        return hash(self.types)

    def head(self, n):
        return Window(self.types[:n])

    def __repr__(self):
        return f"Window(n={len(self.types)})"


class ProbVector:
    def __init__(self, window: Window, values):
        self.window = window
        v = np.asarray(values, dtype=float)
        if v.shape != (len(window),):
            raise ValidationError("values do not match window")
        if np.any(v < -1e-15) or np.any(v > 1 + 1e-15) or np.any(np.isnan(v)):
            raise ValidationError("probability vector entries must lie in [0,1]")
        self.values = np.clip(v, 0.0, 1.0)

    @classmethod
    def constant(cls, window, c):
        return cls(window, np.full(len(window), float(c)))

    def __getitem__(self, t):
        try:
            return float(self.values[self.window.index[t]])
        except KeyError:
            raise DomainError(f"type {t!r} not in window") from None

    def restrict(self, window: Window) -> "ProbVector":
        idx = [self.window.index[t] for t in window]
        return ProbVector(window, self.values[idx])

    def as_dict(self):
        return {t: float(v) for t, v in zip(self.window.types, self.values)}

    def __repr__(self):
        return f"ProbVector(n={len(self.window)})"


# ---------------------------------------------------------------------------
# compiled evaluation of H(u) = 1 - G(1 - u) on a list of rows

_POW, _BERN, _GEOM, _FIN = 0, 1, 2, 3


class CompiledSystem:
    """Flattened representation of the laws of `rows`.

    Column j < len(cols) refers to state entry j, children not in `cols` are
    routed to constant slots whose u-value is given by `outside(child)`.
    """

    def __init__(self, spec: ProcessSpec, rows, cols: dict, outside: Callable):
        self.nrows = len(rows)
        self.ncols = len(cols)
        consts: dict = {}
        term_owner, term_prob = [], []
        f_term, f_kind, f_slot, f_par = [], [], [], []
        fin_fac, fin_k, fin_p = [], [], []

        def slot(y):
            j = cols.get(y)
            if j is not None:
                return j
            v = float(outside(y))
            if v not in consts:
                consts[v] = len(consts)
            return -1 - consts[v]

        for r, x in enumerate(rows):
            lw = spec.law(x)
            if isinstance(lw, ExplicitJoint):
                for p, kids in lw.outcomes:
                    if p == 0:
                        continue
                    t = len(term_owner)
                    term_owner.append(r)
                    term_prob.append(p)
                    for y, n in kids:
                        f_term.append(t); f_kind.append(_POW); f_slot.append(slot(y)); f_par.append(n)
            else:
                t = len(term_owner)
                term_owner.append(r)
                term_prob.append(1.0)
                for c in lw.components:
                    law = c.law
                    sl = slot(c.child)
                    if isinstance(law, Deterministic):
                        if law.n == 0:
                            continue
                        f_kind.append(_POW); f_par.append(law.n)
                    elif isinstance(law, Bernoulli):
                        if law.p == 0:
                            continue
                        f_kind.append(_BERN); f_par.append(law.p)
                    elif isinstance(law, Geometric):
                        f_kind.append(_GEOM); f_par.append(law.log_mean)
                    else:
                        f_kind.append(_FIN); f_par.append(0.0)
                        for k, p in law.pmf:
                            if k > 0 and p > 0:
                                fin_fac.append(len(f_term)); fin_k.append(k); fin_p.append(p)
                    f_term.append(t); f_slot.append(sl)

        self.const_values = np.array(sorted(consts, key=consts.get), dtype=float)
        nc = len(self.const_values)
        # map negative const slots after the state block
        sl = np.array(f_slot, dtype=np.int64)
        sl = np.where(sl < 0, self.ncols + (-1 - sl), sl)
        self.f_slot = sl
        self.f_term = np.array(f_term, dtype=np.int64)
        self.f_kind = np.array(f_kind, dtype=np.int64)
        self.f_par = np.array(f_par, dtype=float)
        self.term_owner = np.array(term_owner, dtype=np.int64)
        self.term_prob = np.array(term_prob, dtype=float)
        self.nterms = len(term_owner)
        self.ext_len = self.ncols + nc
        k = self.f_kind
        self._pow = np.flatnonzero(k == _POW)
        self._bern = np.flatnonzero(k == _BERN)
        self._geom = np.flatnonzero(k == _GEOM)
        self._fin = np.flatnonzero(k == _FIN)
        self.fin_fac = np.array(fin_fac, dtype=np.int64)
        self.fin_k = np.array(fin_k, dtype=float)
        self.fin_p = np.array(fin_p, dtype=float)
        # local index of each finite entry's factor within self._fin
        if len(self._fin):
            pos = {f: n for n, f in enumerate(self._fin)}
            self.fin_local = np.array([pos[f] for f in fin_fac], dtype=np.int64)
        else:
            self.fin_local = np.zeros(0, dtype=np.int64)

    def H(self, u_state: np.ndarray) -> np.ndarray:
        """1 - G(1 - u) for each row."""
        ue = np.concatenate([u_state, self.const_values]) if len(self.const_values) else u_state
        fv = np.empty(len(self.f_kind))
        with np.errstate(divide="ignore", invalid="ignore"):
            L = np.log1p(-ue)
            i = self._pow
            if len(i):
                fv[i] = self.f_par[i] * L[self.f_slot[i]]
            i = self._bern
            if len(i):
                fv[i] = np.log1p(-self.f_par[i] * ue[self.f_slot[i]])
            i = self._geom
            if len(i):
                uu = ue[self.f_slot[i]]
                fv[i] = -np.logaddexp(0.0, self.f_par[i] + np.log(uu))
            i = self._fin
            if len(i):
                Lf = L[self.f_slot[self.fin_fac]]
                part = self.fin_p * -np.expm1(self.fin_k * Lf)
                tot = np.bincount(self.fin_local, part, minlength=len(i))
                fv[i] = np.log1p(-np.minimum(tot, 1.0))
            # 0 * -inf can appear only for zero powers, which are dropped
            tsum = np.bincount(self.f_term, fv, minlength=self.nterms)
            ht = -np.expm1(tsum)
        return np.bincount(self.term_owner, self.term_prob * ht, minlength=self.nrows)

    def G(self, s_state: np.ndarray) -> np.ndarray:
        return 1.0 - self.H(1.0 - s_state)


def _outside_const(value):
    return lambda y: value


def eval_generating_function(spec: ProcessSpec, s: ProbVector, at, outside_value: float = 1.0) -> ProbVector:
    """G_x(s) for x in `at`; children outside s.window read `outside_value`."""
    if not 0.0 <= outside_value <= 1.0:
        raise ValidationError("outside_value must lie in [0,1]")
    at = list(at)
    for x in at:
        if x not in spec.typeset:
            raise DomainError(f"unknown type {x!r}")
    sysm = CompiledSystem(spec, at, s.window.index, _outside_const(1.0 - outside_value))
    g = sysm.G(s.values)
    return ProbVector(Window(at), np.clip(g, 0.0, 1.0))


def mean_matrix_entry(spec: ProcessSpec, x, y) -> float:
    if y not in spec.typeset:
        raise DomainError(f"unknown type {y!r}")
    return float(spec.law(x).mean(y))


def type_graph(spec: ProcessSpec, window: Window) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(window.types)
    for x in window:
        lw = spec.law(x)
        for y in lw.children():
            if y in window and lw.mean(y) > 0:
                g.add_edge(x, y)
    return g


def irreducible_classes(spec: ProcessSpec, window: Window) -> list:
    g = type_graph(spec, window)
    order = window.index
    cls = [sorted(c, key=order.get) for c in nx.strongly_connected_components(g)]
    return sorted(cls, key=lambda c: order[c[0]])


def _prob_one_in(law, cls: set) -> float:
    """P(exactly one child with type in cls)."""
    if isinstance(law, ExplicitJoint):
        return sum(p for p, kids in law.outcomes if sum(n for y, n in kids if y in cls) == 1)
    comps = [c.law for c in law.components if c.child in cls]
    p0 = [c.p0() for c in comps]
    tot = 0.0
    for n, c in enumerate(comps):
        rest = 1.0
        for m, q0 in enumerate(p0):
            if m != n:
                rest *= q0
        tot += c.p1() * rest
    return tot


@dataclass
class SingularityReport:
    non_singular: bool
    violating_classes: list = field(default_factory=list)

    def __bool__(self):
        return self.non_singular


def is_non_singular(spec: ProcessSpec, window: Window) -> SingularityReport:
    bad = []
    for cls in irreducible_classes(spec, window):
        cs = set(cls)
        if all(abs(_prob_one_in(spec.law(y), cs) - 1.0) <= 1e-15 for y in cls):
            bad.append(cls)
    return SingularityReport(not bad, bad)


def is_irreducible(spec: ProcessSpec, window: Window) -> bool:
    return len(irreducible_classes(spec, window)) == 1


# ---------------------------------------------------------------------------
# finite specs from plain data

def finite_spec(laws: dict, name="finite") -> ProcessSpec:
    """laws: {type: law}; the typeset is the key order."""
    types = list(laws)
    ts = FiniteTypeset(types)
    for x, lw in laws.items():
        for y in lw.children():
            if y not in ts:
                raise ValidationError(f"law of {x!r} produces unknown type {y!r}")
    return ProcessSpec(ts, laws.__getitem__, name)


def single_type(pmf, name="single") -> ProcessSpec:
    """Single-type law from {count: prob}; the type is 0."""
    return finite_spec({0: explicit([(p, {0: k}) for k, p in pmf.items()])}, name)


# ---------------------------------------------------------------------------
# canonical process attached to a DAG

def canonical_process_from_dag(dag: nx.DiGraph, b: float = 0.9, name="canonical"):
    """Process whose singleton family realises the implications of `dag`.

    Each vertex has 0 children w.p. 1-b and 3 children w.p. b; every child
    independently lands on the parent (weight 1/2) or on one of its
    out-neighbours in the transitive reduction (1/2 split evenly).  Sinks keep
    all mass.  Returns the spec, the singleton subsets and the weight map r.
    """
    from .subsets import SubsetSpec

    if not nx.is_directed_acyclic_graph(dag):
        raise ValidationError(f"graph has a cycle: {nx.find_cycle(dag)}")
    if not (2.0 / 3.0 < b <= 1.0):
        raise ValidationError("b must lie in (2/3, 1]")
    red = nx.transitive_reduction(dag)
    weights = {}
    for i in dag.nodes:
        out = sorted(red.successors(i), key=repr)
        if not out:
            weights[i] = {i: 1.0}
        else:
            w = {i: 0.5}
            for j in out:
                w[j] = 0.5 / len(out)
            weights[i] = w

    def law_of(i):
        w = weights[i]
        kids = list(w)
        outs = [(1.0 - b, {})]
        # multinomial placement of 3 children
        for combo in _compositions(3, len(kids)):
            pr = b * math.factorial(3)
            for c, k in zip(combo, kids):
                pr *= w[k] ** c / math.factorial(c)
            outs.append((pr, {k: c for c, k in zip(combo, kids) if c}))
        return explicit(outs)

    verts = list(dag.nodes)
    spec = ProcessSpec(FiniteTypeset(verts), law_of, name)
    fam = [SubsetSpec.of([v], name=f"{{{v}}}") for v in verts]
    return spec, fam, weights


def _compositions(n, k):
    if k == 1:
        yield (n,)
        return
    for a in range(n + 1):
        for rest in _compositions(n - a, k - 1):
            yield (a,) + rest


def canonical_local_extinction(b: float, tol=1e-15) -> float:
    """Minimal root of psi(s) = phi(s/2 + 1/2), phi(s) = 1-b + b s^3."""
    s = 0.0
    for _ in range(100000):
        t = 1 - b + b * (0.5 * s + 0.5) ** 3
        if abs(t - s) < tol:
            return t
        s = t
    return s
