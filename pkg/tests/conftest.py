import itertools
import random

import networkx as nx
import numpy as np
import pytest

from extprob import explicit, finite_spec, single_type
from extprob.family import make_family_graph

CUBIC = (5 ** 0.5 - 1) / 2


@pytest.fixture
def cubic():
    return single_type({0: 0.5, 3: 0.5}, "cubic")


def random_finite_spec(rng: random.Random, max_types=6, max_outcomes=4, max_kids=3):
    """Random finite spec with explicit joint laws.  Every type dies out
    childless with positive probability, so every irreducible class is
    non-singular."""
    n = rng.randint(1, max_types)
    laws = {}
    for x in range(n):
        m = rng.randint(1, max_outcomes)
        w = [rng.random() + 0.05 for _ in range(m + 1)]
        tot = sum(w)
        outs = [(w[0] / tot, {})]
        for k in range(m):
            kids = {}
            for _ in range(rng.randint(1, max_kids)):
                y = rng.randrange(n)
                kids[y] = kids.get(y, 0) + 1
            outs.append((w[k + 1] / tot, kids))
        laws[x] = explicit(outs)
    return finite_spec(laws, "random")


def random_dag(rng: random.Random, n, p):
    order = list(range(n))
    rng.shuffle(order)
    edges = [(order[a], order[b]) for a in range(n) for b in range(a + 1, n) if rng.random() < p]
    return make_family_graph(range(n), edges)


def all_subsets(n):
    return [frozenset(c) for r in range(n + 1) for c in itertools.combinations(range(n), r)]
