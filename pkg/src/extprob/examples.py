"""Built-in processes and families: the level/phase process on N_0^2, the
supercritical grid, the binary-tree implication graph, and the closed forms
used to check the level process by hand."""
from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx

from .process import (Bernoulli, Deterministic, Geometric, GridTypeset, ProcessSpec,
                      ValidationError, explicit, product)
from .subsets import SubsetSpec
from .family import CardinalityClass, FamilyGraph, make_family_graph


@dataclass(frozen=True)
class Example1Params:
    p: float = 0.1
    q: float = 0.5
    r: float = 1.0

    def __post_init__(self):
        if not (0 < self.p < 1 and 0 < self.q < 1 and self.r > 0):
            raise ValidationError(f"need 0<p<1, 0<q<1, r>0; got {self}")


def example1_law(params: Example1Params):
    p, q, log_r = params.p, params.q, math.log(params.r)

    def law_of(x):
        i, j = x
        if i == 0 and j == 0:
            return product(((1, 0), Bernoulli(q)))
        if i == 0:
            return product(((0, j - 1), Bernoulli(p)))
        if j == 0:
            return product(((i, 1), Deterministic(1)), ((i + 1, 0), Bernoulli(q)))
        # mean r^(1-j), kept in log form
        return product(((i - 1, j), Geometric((1 - j) * log_r)), ((i, j + 1), Deterministic(1)))
    return law_of


def level(i: int) -> SubsetSpec:
    return SubsetSpec(f"L{i}", lambda t, i=i: t[0] == i, False)


def phase(j: int) -> SubsetSpec:
    return SubsetSpec(f"P{j}", lambda t, j=j: t[1] == j, False)


def phase_family_member(i: int) -> SubsetSpec:
    """(i, even) together with the whole phase 2i+1."""
    return SubsetSpec(f"L'{i}", lambda t, i=i: (t[0] == i and t[1] % 2 == 0) or t[1] == 2 * i + 1, False)


def build_example1(params: Example1Params | None = None, level_weight: int = 1, levels: int = 8,
                   phases: int = 8):
    """Returns (spec, [L_0..L_{levels-1}], [P_0..P_{phases-1}])."""
    params = params or Example1Params()
    spec = ProcessSpec(GridTypeset(level_weight), example1_law(params),
                       f"example1(p={params.p},q={params.q},r={params.r})")
    return spec, [level(i) for i in range(levels)], [phase(j) for j in range(phases)]


def build_example1_phase_family(spec=None, n: int = 5):
    return [phase_family_member(i) for i in range(n)]


def phase_family_cotail(i: int) -> SubsetSpec:
    """Union of all phase-family members except the i-th (infinitely many)."""
    def member(t, i=i):
        a, b = t
        if b % 2 == 0:
            return a != i
        return (b - 1) // 2 != i
    return SubsetSpec(f"U_(j!={i}) L'j", member, False)


# ---------------------------------------------------------------------------

def example2_law(x):
    i, j = x
    return explicit([(1 / 3, {}), (1 / 2, {(i, j): 3}), (1 / 12, {(i, j + 1): 3}), (1 / 12, {(i + 1, j): 3})])


def example2_order(a, b) -> bool:
    """a => b in the grid process."""
    return a[0] <= b[0] and a[1] <= b[1]


def build_example2():
    """Returns (spec, singleton family over a 4x4 corner, order predicate, descriptors)."""
    spec = ProcessSpec(GridTypeset(1), example2_law, "example2")
    fam = [SubsetSpec.of([(i, j)], name=f"{{({i},{j})}}") for i in range(4) for j in range(4)]
    desc = {"primitive": CardinalityClass.countable(), "chains": CardinalityClass.countable()}
    return spec, fam, example2_order, desc


def example2_graph(n: int) -> FamilyGraph:
    verts = [(i, j) for i in range(n) for j in range(n)]
    edges = [(a, b) for a in verts for b in verts if a != b and example2_order(a, b)]
    return make_family_graph(verts, edges, infinite=True, generator=f"grid {n}x{n}")


# ---------------------------------------------------------------------------
# binary tree of +-1 sequences

def tree_vertices(depth: int):
    out = [()]
    frontier = [()]
    for _ in range(depth):
        frontier = [v + (s,) for v in frontier for s in (-1, 1)]
        out.extend(frontier)
    return out


def tree_edge(beta, alpha) -> bool:
    """Edge beta -> alpha of the modified binary tree."""
    m, n = len(beta), len(alpha)
    if m + 1 == n and alpha[:m] == beta:
        return True
    if m >= n >= 1:
        return (beta[:n - 1] == alpha[:n - 1] and beta[n - 1] == 1 and alpha[n - 1] == -1
                and all(b == -1 for b in beta[n:]))
    return False


def build_example3_graph(depth: int) -> FamilyGraph:
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    verts = tree_vertices(depth)
    edges = [(b, a) for b in verts for a in verts if b != a and tree_edge(b, a)]
    g = make_family_graph(verts, edges, infinite=True, generator=f"binary tree depth {depth}")
    return g


def example3_descriptors():
    return {"primitive": CardinalityClass.countable(), "chains": CardinalityClass.uncountable()}


def figure1_graph() -> FamilyGraph:
    return make_family_graph([1, 2, 3, 4], [(1, 3), (2, 1), (2, 4)])


def figure2_graph(n: int) -> FamilyGraph:
    """Vertices 1..n; 2=>1, 3=>2 and the chain 3=>4=>5=>..."""
    verts = list(range(1, n + 1))
    edges = [(2, 1), (3, 2)] + [(i, i + 1) for i in range(3, n)]
    open_ = {n} if n >= 3 else set()
    return make_family_graph(verts, [e for e in edges if e[1] <= n], infinite=True,
                             generator=f"figure2 window {n}", open_vertices=open_)


def figure3_graph(n: int) -> FamilyGraph:
    """Figure-2 graph plus i => i' for i >= 4 (primed vertices are sinks)."""
    verts = list(range(1, n + 1)) + [f"{i}'" for i in range(4, n + 1)]
    edges = [(2, 1), (3, 2)] + [(i, i + 1) for i in range(3, n)] + [(i, f"{i}'") for i in range(4, n + 1)]
    return make_family_graph(verts, edges, infinite=True, generator=f"figure3 window {n}",
                             open_vertices={n})


# ---------------------------------------------------------------------------
# closed forms for the level process

def geometric_composition(i: int, j: int, r: float, s: float) -> float:
    """i-fold composition of the geometric pgf with mean r^(1-j), via
    1/(1-G) = a^i/(1-s) + (1 + a + ... + a^(i-1)), a = r^(j-1)."""
    if i < 1:
        raise ValidationError("i must be >= 1")
    if not 0.0 <= s <= 1.0:
        raise ValidationError("s must lie in [0,1]")
    if s == 1.0:
        return 1.0
    a = r ** (j - 1)
    tail = float(i) if a == 1 else (1 - a ** i) / (1 - a)
    return 1.0 - 1.0 / (a ** i / (1.0 - s) + tail)


def geometric_composition_direct(i, j, r, s):
    """Plain i-fold iteration, kept in u = 1 - s so s near 1 keeps its digits."""
    m = r ** (1 - j)
    u = 1.0 - s
    for _ in range(i):
        u = m * u / (1.0 + m * u)
    return 1.0 - u


def frozen_descendant_mean(i: int, p: float, r: float, terms: int = 200):
    """Partial sum of sum_j C(i+j-1, j-1) r^(-(j-1) i) p^j in log space.

    Returns (partial_sum, convergent) with convergent iff p / r^i < 1."""
    if terms < 1:
        raise ValidationError("terms must be >= 1")
    ratio = p / r ** i
    logs = []
    for j in range(1, terms + 1):
        lc = math.lgamma(i + j) - math.lgamma(j) - math.lgamma(i + 1)
        logs.append(lc - (j - 1) * i * math.log(r) + j * math.log(p))
    mx = max(logs)
    if mx > 700:
        total = math.inf
    else:
        total = sum(math.exp(v) for v in logs)
    return total, ratio < 1


def distinct_level_threshold(p: float, i: int) -> float:
    return p ** (1.0 / i)


def expected_distinct_count(r: float, p: float, levels: int) -> int:
    return min(sum(1 for i in range(1, levels + 1) if r > p ** (1.0 / i)) + 1, levels)
