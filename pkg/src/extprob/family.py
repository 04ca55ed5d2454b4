"""Combinatorics of implication graphs between subsets of types.

Vertices are indices of a family {A_i}; an edge i -> j means A_i => A_j.
The relation is stored transitively closed and irreflexive as Python int
bitsets (bit n <-> n-th vertex).  Reflexivity is applied in the predicates.

Windows of infinite graphs carry a set of "open" vertices, i.e. vertices
that imply something beyond the window.  An IndexSubset with extends=True
stands for its window members plus an unspecified part beyond the window,
reached through the open vertices.  All window computations are projections
and are exact only for finite graphs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import networkx as nx
import numpy as np

from .process import ValidationError


class EnumerationOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class CardinalityClass:
    tag: str  # "finite", "countable", "uncountable"
    n: int | None = None

    @classmethod
    def finite(cls, n=None):
        return cls("finite", n)

    @classmethod
    def countable(cls):
        return cls("countable")

    @classmethod
    def uncountable(cls):
        return cls("uncountable")

    def __str__(self):
        if self.tag == "finite":
            return "Finite" if self.n is None else f"Finite({self.n})"
        return {"countable": "CountablyInfinite", "uncountable": "Uncountable"}[self.tag]


def ext_cardinality(p_class: CardinalityClass, c_class: CardinalityClass) -> CardinalityClass:
    """Cardinality of the (primitive, chain) pair set from the two factors."""
    tags = {p_class.tag, c_class.tag}
    if "uncountable" in tags:
        return CardinalityClass.uncountable()
    if "countable" in tags:
        return CardinalityClass.countable()
    n = p_class.n * c_class.n if p_class.n is not None and c_class.n is not None else None
    return CardinalityClass.finite(n)


@dataclass(frozen=True)
class IndexSubset:
    members: frozenset
    extends: bool = False

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, i):
        return i in self.members

    def sorted(self, g=None):
        if g is None:
            return sorted(self.members, key=repr)
        return sorted(self.members, key=g.index.get)

    def __repr__(self):
        s = "{" + ",".join(map(str, sorted(self.members, key=repr))) + "}"
        return s + ("+..." if self.extends else "")


def _subset(x, g=None) -> IndexSubset:
    """Plain iterables on a window of an infinite graph extend beyond the
    window exactly when they contain an open vertex."""
    if isinstance(x, IndexSubset):
        return x
    members = frozenset(x)
    ext = False
    if g is not None and g.infinite and g.open_mask:
        ext = bool(g.mask(IndexSubset(members)) & g.open_mask)
    return IndexSubset(members, ext)


class FamilyGraph:
    def __init__(self, vertices, succ, infinite=False, generator=None, open_mask=0):
        self.vertices = tuple(vertices)
        self.index = {v: n for n, v in enumerate(self.vertices)}
        self.n = len(self.vertices)
        self.succ = list(succ)  # strict successors, closed
        pred = [0] * self.n
        for i in range(self.n):
            m = self.succ[i]
            while m:
                low = m & -m
                pred[low.bit_length() - 1] |= 1 << i
                m ^= low
        self.pred = pred
        self.up = [self.succ[i] | (1 << i) for i in range(self.n)]      # i => j, reflexive
        self.down = [self.pred[i] | (1 << i) for i in range(self.n)]    # j => i, reflexive
        self.infinite = infinite
        self.generator = generator
        self.open_mask = open_mask

    # --- conversions
    def mask(self, I) -> int:
        m = 0
        for v in _subset(I).members:
            try:
                m |= 1 << self.index[v]
            except KeyError:
                raise ValidationError(f"{v!r} is not a vertex") from None
        return m

    def members(self, mask: int) -> frozenset:
        out = []
        while mask:
            low = mask & -mask
            out.append(self.vertices[low.bit_length() - 1])
            mask ^= low
        return frozenset(out)

    def subset(self, mask: int, extends=False) -> IndexSubset:
        return IndexSubset(self.members(mask), extends)

    # --- queries
    def implies(self, a, b) -> bool:
        i, j = self.index[a], self.index[b]
        return bool(self.up[i] >> j & 1)

    def edges(self):
        return [(self.vertices[i], self.vertices[j]) for i in range(self.n)
                for j in range(self.n) if self.succ[i] >> j & 1]

    @property
    def open_vertices(self):
        return self.members(self.open_mask)

    def to_networkx(self):
        g = nx.DiGraph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(self.edges())
        return g

    def __repr__(self):
        return f"FamilyGraph(n={self.n}, edges={sum(bin(s).count('1') for s in self.succ)})"


def make_family_graph(K: Iterable, edges: Iterable, infinite=False, generator=None,
                      open_vertices=()) -> FamilyGraph:
    """Transitive closure of the given implications; cycles are rejected."""
    K = list(K)
    g = nx.DiGraph()
    g.add_nodes_from(K)
    for a, b in edges:
        if a not in g or b not in g:
            raise ValidationError(f"edge ({a!r},{b!r}) leaves the vertex set")
        if a != b:
            g.add_edge(a, b)
    try:
        cyc = nx.find_cycle(g)
        raise ValidationError(f"implication cycle: {[e[0] for e in cyc]}")
    except nx.NetworkXNoCycle:
        pass
    idx = {v: n for n, v in enumerate(K)}
    succ = [0] * len(K)
    for v in reversed(list(nx.topological_sort(g))):
        m = 0
        for w in g.successors(v):
            m |= (1 << idx[w]) | succ[idx[w]]
        succ[idx[v]] = m
    om = 0
    for v in open_vertices:
        om |= 1 << idx[v]
    # anything implying an open vertex is open too
    if om:
        for i in range(len(K)):
            if succ[i] & om:
                om |= 1 << i
    return FamilyGraph(K, succ, infinite, generator, om)


def graph_from_json(data: dict) -> FamilyGraph:
    verts = [tuple(v) if isinstance(v, list) else v for v in data["vertices"]]
    fix = lambda v: tuple(v) if isinstance(v, list) else v
    edges = [(fix(a), fix(b)) for a, b in data.get("implies", [])]
    return make_family_graph(verts, edges, bool(data.get("infinite", False)), data.get("generator"),
                             [fix(v) for v in data.get("open", [])])


# ---------------------------------------------------------------------------

def _upset(g: FamilyGraph, mask: int) -> int:
    """{i : i => j for some j in mask}, reflexive."""
    out = 0
    m = mask
    while m:
        low = m & -m
        out |= g.down[low.bit_length() - 1]
        m ^= low
    return out


def _is_antichain(g, mask):
    m = mask
    while m:
        low = m & -m
        i = low.bit_length() - 1
        if g.succ[i] & mask:
            return False
        m ^= low
    return True


def is_primitive(g: FamilyGraph, I) -> bool:
    I = _subset(I, g)
    m = g.mask(I)
    if I.extends and m & g.open_mask:
        return False
    return _is_antichain(g, m)


def primitive_subsets(g: FamilyGraph, max_size: int | None = None, limit: int = 2 ** 24):
    """All antichains (edgeless induced subgraphs), ordered by size then by
    vertex order."""
    comp = [g.succ[i] | g.pred[i] for i in range(g.n)]
    found = []
    cap = g.n if max_size is None else max_size

    # iterative dfs: (next vertex, current mask, allowed candidates, size)
    stack = [(0, 0, (1 << g.n) - 1, 0)]
    while stack:
        start, cur, cand, size = stack.pop()
        found.append(cur)
        if len(found) > limit:
            raise EnumerationOverflow(f"more than {limit} antichains")
        if size == cap:
            continue
        c = cand >> start << start
        children = []
        while c:
            low = c & -c
            v = low.bit_length() - 1
            children.append((v + 1, cur | low, cand & ~comp[v] & ~low, size + 1))
            c ^= low
        stack.extend(reversed(children))
    found.sort(key=lambda m: (bin(m).count("1"), _bits_key(m)))
    return [g.subset(m) for m in found]


def _bits_key(m):
    out = []
    while m:
        low = m & -m
        out.append(low.bit_length() - 1)
        m ^= low
    return out


@dataclass(frozen=True)
class Decomposition:
    i_m: IndexSubset
    i_d: IndexSubset
    i_c: IndexSubset


def _maximal_mask(g, mask, extends):
    out = 0
    m = mask
    while m:
        low = m & -m
        i = low.bit_length() - 1
        if not (g.succ[i] & mask) and not (extends and g.open_mask >> i & 1):
            out |= low
        m ^= low
    return out


def decompose(g: FamilyGraph, I) -> Decomposition:
    I = _subset(I, g)
    m = g.mask(I)
    mm = _maximal_mask(g, m, I.extends)
    dm = m & _upset(g, mm)
    cm = m & ~dm
    return Decomposition(g.subset(mm), g.subset(dm), g.subset(cm, I.extends))


def upward_closure(g: FamilyGraph, I) -> IndexSubset:
    I = _subset(I, g)
    return g.subset(_upset(g, g.mask(I)), I.extends)


def _covers(g, a_mask, a_ext, b_mask, b_ext):
    """Every member of a implies some member of b (window projection)."""
    if a_ext and not b_ext:
        return False
    m = a_mask
    while m:
        low = m & -m
        i = low.bit_length() - 1
        if not (g.up[i] & b_mask) and not (b_ext and g.open_mask >> i & 1):
            return False
        m ^= low
    return True


def equivalent(g: FamilyGraph, I, J) -> bool:
    I, J = _subset(I, g), _subset(J, g)
    a, b = g.mask(I), g.mask(J)
    return _covers(g, a, I.extends, b, J.extends) and _covers(g, b, J.extends, a, I.extends)


def class_signature(g: FamilyGraph, I):
    d = decompose(g, I)
    return d.i_m, upward_closure(g, d.i_c)


def class_of_primitive(g: FamilyGraph, I) -> list:
    """All J with I <= J <= I+ (the class of a primitive I, finite graphs)."""
    I = _subset(I, g)
    if not is_primitive(g, I):
        raise ValidationError(f"{I} is not primitive")
    base = g.mask(I)
    free = _upset(g, base) & ~base
    bits = _bits_key(free)
    out = []
    for k in range(1 << len(bits)):
        m = base
        for n, b in enumerate(bits):
            if k >> n & 1:
                m |= 1 << b
        out.append(m)
    out.sort(key=lambda m: (bin(m).count("1"), _bits_key(m)))
    return [g.subset(m) for m in out]


class IAVerdict(enum.Enum):
    MEMBER = "member"
    NOT_MEMBER = "not member"
    I_NOT_PRIMITIVE = "precondition failed: I is not primitive"
    J_NOT_PURE = "precondition failed: J differs from J_c"
    J_NOT_CLOSED = "precondition failed: J differs from J+"

    def __bool__(self):
        return self is IAVerdict.MEMBER


def is_IA_element(g: FamilyGraph, I, J) -> IAVerdict:
    I, J = _subset(I, g), _subset(J, g)
    if not is_primitive(g, I):
        return IAVerdict.I_NOT_PRIMITIVE
    dj = decompose(g, J)
    if dj.i_c.members != J.members:
        return IAVerdict.J_NOT_PURE
    if upward_closure(g, J) != J:
        return IAVerdict.J_NOT_CLOSED
    if I.members & J.members:
        return IAVerdict.NOT_MEMBER
    ip = g.mask(upward_closure(g, I))
    rest = g.mask(J) & ~ip
    closed = g.subset(_upset(g, rest), J.extends)
    return IAVerdict.MEMBER if closed == J else IAVerdict.NOT_MEMBER


def enumerate_classes_bruteforce(g: FamilyGraph, max_vertices: int = 16):
    """Partition all subsets of K by `equivalent`, straight from the
    definition.  Each class is (representative, members) and the
    representative is the first member in (size, vertex order)."""
    if g.n > max_vertices:
        raise ValidationError(f"brute force refused for {g.n} > {max_vertices} vertices")
    n = g.n
    masks = sorted(range(1 << n), key=lambda m: (bin(m).count("1"), _bits_key(m)))
    up = np.array(g.up, dtype=np.int64)
    reps = np.zeros(0, dtype=np.int64)
    classes: list = []
    for m in masks:
        if len(reps):
            # (i) every i in I implies some member of the representative
            ok = np.ones(len(reps), bool)
            for i in _bits_key(m):
                ok &= (up[i] & reps) != 0
            # (ii) every member of the representative implies some i in I
            dm = _upset(g, m)
            ok &= (reps & ~dm) == 0
            hit = np.flatnonzero(ok)
        else:
            hit = []
        if len(hit):
            classes[hit[0]][1].append(m)
        else:
            classes.append((m, [m]))
            reps = np.append(reps, m)
    return [(g.subset(r), [g.subset(x) for x in mem]) for r, mem in classes]


def enumerate_IA_finite(g: FamilyGraph):
    if g.infinite:
        raise ValidationError("graph is a window of an infinite family; use the windowed "
                              "analysis (decompose, class_signature, detect_ascending_chains)")
    empty = IndexSubset(frozenset())
    return [(I, empty) for I in primitive_subsets(g)]


def longest_path(g: FamilyGraph) -> int:
    """Number of vertices on a longest implication chain."""
    best = [1] * g.n
    order = list(nx.topological_sort(g.to_networkx()))
    for v in reversed(order):
        i = g.index[v]
        s = g.succ[i]
        if s:
            best[i] = 1 + max(best[j] for j in _bits_key(s))
    return max(best, default=0)


@dataclass
class ChainReport:
    verdict: str  # "none", "probable", "not detected"
    lengths: tuple
    exact: bool


def detect_ascending_chains(g: FamilyGraph, growth: FamilyGraph | None = None) -> ChainReport:
    if not g.infinite:
        return ChainReport("none", (longest_path(g),), True)
    if growth is None:
        raise ValidationError("a second, larger window is needed for a windowed family")
    a, b = longest_path(g), longest_path(growth)
    return ChainReport("probable" if b > a else "not detected", (a, b), False)


def family_graph_from_relations(names, relation_matrix) -> FamilyGraph:
    """Graph with i -> j whenever relation_matrix[i][j] says A_i => A_j."""
    edges = [(names[i], names[j]) for i in range(len(names)) for j in range(len(names))
             if i != j and relation_matrix[i][j]]
    return make_family_graph(names, edges)
