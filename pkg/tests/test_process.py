import random

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from extprob import (Bernoulli, Deterministic, DomainError, ExplicitFinite, Geometric, GridTypeset,
                     ProbVector, ValidationError, Window, canonical_process_from_dag,
                     eval_generating_function, explicit, finite_spec, irreducible_classes,
                     is_non_singular, mean_matrix_entry, product, single_type, type_graph)
from extprob.examples import Example1Params, build_example1, build_example2
from extprob.process import canonical_local_extinction, is_irreducible

from conftest import random_finite_spec


def ex1(r=1.0):
    return build_example1(Example1Params(0.1, 0.5, r))[0]


def test_grid_enumeration_is_diagonal():
    g = GridTypeset()
    assert g.first(6) == [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]
    for n, t in enumerate(g.first(200)):
        assert g.index(t) == n
    with pytest.raises(DomainError):
        g.index((-1, 0))


def test_weighted_grid_enumeration():
    g = GridTypeset(3)
    ts = g.first(500)
    assert len(set(ts)) == 500
    assert all(g.index(t) == n for n, t in enumerate(ts))
    keys = [3 * i + j for i, j in ts]
    assert keys == sorted(keys)


def test_law_validation():
    with pytest.raises(ValidationError):
        Bernoulli(1.5)
    with pytest.raises(ValidationError):
        explicit([(0.5, {}), (0.4, {0: 1})])
    with pytest.raises(ValidationError):
        product((0, Bernoulli(0.5)), (0, Deterministic(1)))
    with pytest.raises(ValidationError):
        finite_spec({0: explicit([(1.0, {1: 1})])})


def test_geometric_parametrisation():
    g = Geometric.with_mean(2.0)
    assert g.theta == pytest.approx(2 / 3)
    assert 1 - g.p0() == pytest.approx(2 / 3)
    assert g.mean == pytest.approx(2.0)


def test_pgf_examples(cubic):
    w = Window([0])
    assert eval_generating_function(cubic, ProbVector(w, [1.0]), [0])[0] == 1.0
    assert eval_generating_function(cubic, ProbVector(w, [0.0]), [0])[0] == 0.5
    spec = ex1()
    s = ProbVector(Window([(1, 0)]), [0.6])
    assert eval_generating_function(spec, s, [(0, 0)])[(0, 0)] == pytest.approx(0.8, abs=1e-15)


def test_pgf_rejects_bad_input(cubic):
    w = Window([0])
    with pytest.raises(DomainError):
        eval_generating_function(cubic, ProbVector(w, [0.5]), [7])
    with pytest.raises(ValidationError):
        ProbVector(w, [1.2])


def test_mean_matrix_examples():
    spec = ex1(0.5)
    for i, j in [(1, 1), (2, 3), (4, 2)]:
        assert mean_matrix_entry(spec, (i, j), (i - 1, j)) == pytest.approx(0.5 ** (1 - j), rel=1e-12)
    assert mean_matrix_entry(spec, (0, 0), (1, 0)) == 0.5
    sp2 = build_example2()[0]
    assert mean_matrix_entry(sp2, (2, 3), (2, 3)) == pytest.approx(1.5)
    dead = single_type({0: 1.0})
    assert mean_matrix_entry(dead, 0, 0) == 0


def test_law_of_2_3_example1():
    lw = ex1(2.0).law((2, 3))
    comps = {c.child: c.law for c in lw.components}
    assert set(comps) == {(1, 3), (2, 4)}
    assert comps[(1, 3)].mean == pytest.approx(2.0 ** -2)
    assert comps[(2, 4)] == Deterministic(1)


def test_type_graph_and_classes():
    spec = ex1()
    w = Window([(0, 0), (1, 0), (1, 1), (0, 1)])
    g = type_graph(spec, w)
    assert nx.is_simple_path(g, [(0, 0), (1, 0), (1, 1), (0, 1)]) and g.has_edge((0, 1), (0, 0))
    assert [set(c) for c in irreducible_classes(spec, w)] == [set(w.types)]
    assert is_non_singular(spec, w)
    sp2 = build_example2()[0]
    w2 = sp2.window(10)
    g2 = type_graph(sp2, w2)
    for (i, j) in w2:
        assert set(g2.successors((i, j))) <= {(i, j), (i, j + 1), (i + 1, j)}
    assert all(len(c) == 1 for c in irreducible_classes(sp2, w2))
    dead = finite_spec({0: explicit([(1.0, {})]), 1: explicit([(1.0, {})])})
    assert type_graph(dead, dead.window()).number_of_edges() == 0


def test_singularity():
    assert not is_non_singular(single_type({1: 1.0}), Window([0]))
    assert is_non_singular(single_type({0: 0.5, 3: 0.5}), Window([0]))


def test_canonical_process_weights():
    g = nx.DiGraph([(1, 2)])
    spec, fam, w = canonical_process_from_dag(g)
    assert w[1] == {1: 0.5, 2: 0.5} and w[2] == {2: 1.0}
    g1 = nx.DiGraph()
    g1.add_node(1)
    assert canonical_process_from_dag(g1)[2][1] == {1: 1.0}
    with pytest.raises(ValidationError):
        canonical_process_from_dag(nx.DiGraph([(1, 2), (2, 1)]))
    with pytest.raises(ValidationError):
        canonical_process_from_dag(g, b=0.6)
    sp, _, _ = canonical_process_from_dag(nx.DiGraph([(1, 2), (2, 3)]))
    assert all(len(c) == 1 for c in irreducible_classes(sp, sp.window()))


def test_canonical_local_extinction():
    b = 0.9
    s = canonical_local_extinction(b)
    assert 0 < s < 1
    assert abs(1 - b + b * (0.5 * s + 0.5) ** 3 - s) < 1e-13


# --- properties ------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6), data=st.data())
def test_pgf_monotone(seed, data):
    spec = random_finite_spec(random.Random(seed))
    w = spec.window()
    n = len(w)
    s = np.array(data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    t = np.minimum(1.0, s + np.array(data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))))
    gs = eval_generating_function(spec, ProbVector(w, s), w).values
    gt = eval_generating_function(spec, ProbVector(w, t), w).values
    assert np.all(gs <= gt + 1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_pgf_at_one_and_mean_derivative(seed):
    spec = random_finite_spec(random.Random(seed))
    w = spec.window()
    one = ProbVector.constant(w, 1.0)
    assert np.all(eval_generating_function(spec, one, w).values == 1.0)
    h = 1e-4

    def diff(y, h):
        s = ProbVector(w, [1 - h if t == y else 1.0 for t in w])
        return (1 - eval_generating_function(spec, s, w).values) / h

    for y in w:
        # one Richardson step removes the O(h) term of the one-sided difference
        fd = 2 * diff(y, h / 2) - diff(y, h)
        for n, x in enumerate(w):
            assert abs(fd[n] - mean_matrix_entry(spec, x, y)) < 1e-6


@settings(max_examples=100, deadline=None)
@given(m=st.floats(1e-6, 1e6), s=st.floats(0, 1))
def test_geometric_pgf_closed_form(m, s):
    spec = finite_spec({0: product((1, Geometric.with_mean(m))), 1: explicit([(1.0, {})])})
    v = eval_generating_function(spec, ProbVector(Window([1]), [s]), [0])[0]
    assert abs(v - 1 / (1 + m * (1 - s))) < 1e-14


def test_explicit_finite_component():
    spec = finite_spec({0: product((0, ExplicitFinite(((0, 0.25), (2, 0.75)))))})
    v = eval_generating_function(spec, ProbVector(Window([0]), [0.5]), [0])[0]
    assert v == pytest.approx(0.25 + 0.75 * 0.25)


def test_example1_laws_sum_to_one():
    spec = ex1(0.7)
    for x in spec.window(100):
        g = eval_generating_function(spec, ProbVector(Window([]), []), [x], outside_value=1.0)
        assert g[x] == 1.0
    assert is_irreducible(spec, Window([(0, 0), (1, 0), (1, 1), (0, 1)]))
