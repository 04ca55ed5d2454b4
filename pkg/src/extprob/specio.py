"""JSON process specs and type/subset parsing for the command line.

Finite typesets:

    {"types": [0, 1],
     "laws": {"0": {"form": "explicit", "outcomes": [[0.25, {}], [0.75, {"0": 2}]]},
              "1": {"form": "product", "components": [["0", {"law": "bernoulli", "p": 0.5}]]}}}

Law keys and child names are matched against the types through their JSON
text, so a type [1, 2] is written "[1, 2]" as a key.  Component laws are
bernoulli(p), deterministic(n), geometric(mean) and finite(pmf as [[k, p], ...]).

Built-ins: {"builtin": "example1", "p": .., "q": .., "r": ..},
{"builtin": "example2"}, {"builtin": "canonical_dag", "vertices": [..],
"edges": [[a, b], ..], "b": 0.9}.
"""
from __future__ import annotations

import json
import math

import networkx as nx

from .process import (Bernoulli, Deterministic, ExplicitFinite, Geometric, ProcessSpec,
                      ValidationError, canonical_process_from_dag, explicit, finite_spec, product)
from .subsets import SubsetSpec, union


def _fix(v):
    if isinstance(v, list):
        return tuple(_fix(a) for a in v)
    return v


def parse_type(text: str):
    """'3' -> 3, '[1,2]' or '(1,2)' -> (1, 2), anything else stays a string."""
    t = text.strip()
    if t.startswith("(") and t.endswith(")"):
        t = "[" + t[1:-1] + "]"
    try:
        return _fix(json.loads(t))
    except json.JSONDecodeError:
        return text.strip()


def parse_types(text: str) -> list:
    """A JSON list ('[0, 1]', '[[0,0],[1,0]]'), or items separated by ';'
    (or by ',' when there are no brackets): '0,1', '(0,0);(1,0)'."""
    t = text.strip()
    if t.startswith("["):
        try:
            v = json.loads(t)
        except json.JSONDecodeError:
            v = None
        if isinstance(v, list):
            return [_fix(a) for a in v]
    sep = ";" if ("(" in t or "[" in t or ";" in t) else ","
    return [parse_type(a) for a in t.split(sep) if a.strip()]


def _component_law(d):
    kind = d.get("law")
    if kind == "bernoulli":
        return Bernoulli(float(d["p"]))
    if kind == "deterministic":
        return Deterministic(int(d["n"]))
    if kind == "geometric":
        if "log_mean" in d:
            return Geometric(float(d["log_mean"]))
        return Geometric.with_mean(float(d["mean"]))
    if kind == "finite":
        return ExplicitFinite(tuple((int(k), float(p)) for k, p in d["pmf"]))
    raise ValidationError(f"unknown component law {kind!r}")


def _law(d, lookup):
    form = d.get("form")
    if form == "explicit":
        return explicit([(float(p), {lookup(c): int(n) for c, n in kids.items()})
                         for p, kids in d["outcomes"]])
    if form == "product":
        return product(*[(lookup(c), _component_law(cd)) for c, cd in d["components"]])
    raise ValidationError(f"unknown law form {form!r}")


def _key(t):
    return json.dumps(list(t) if isinstance(t, tuple) else t)


def spec_from_json(data: dict):
    """Returns (spec, named subsets available for this spec)."""
    if "builtin" in data:
        return _builtin(data)
    types = [_fix(t) for t in data["types"]]
    tset = set(types)
    by_key = {}
    for t in types:
        by_key[_key(t)] = t
        if not isinstance(t, tuple):
            by_key[str(t)] = t

    def lookup(c):
        if isinstance(c, str) and c in by_key:
            return by_key[c]
        c = _fix(c)
        if c in tset:
            return c
        raise ValidationError(f"unknown type {c!r} in law")

    laws = {}
    for k, d in data["laws"].items():
        laws[lookup(k)] = _law(d, lookup)
    missing = [t for t in types if t not in laws]
    if missing:
        raise ValidationError(f"no law given for types {missing}")
    spec = finite_spec({t: laws[t] for t in types}, data.get("name", "finite"))
    return spec, {}


def _builtin(data):
    from .examples import Example1Params, build_example1, build_example2

    name = data["builtin"]
    if name == "example1":
        params = Example1Params(float(data.get("p", 0.1)), float(data.get("q", 0.5)), float(data.get("r", 1.0)))
        spec, L, P = build_example1(params, levels=int(data.get("levels", 8)), phases=int(data.get("phases", 8)))
        return spec, {s.name: s for s in L + P}
    if name == "example2":
        spec, fam, _, _ = build_example2()
        return spec, {}
    if name == "canonical_dag":
        g = nx.DiGraph()
        g.add_nodes_from(_fix(v) for v in data["vertices"])
        g.add_edges_from((_fix(a), _fix(b)) for a, b in data.get("edges", []))
        spec, fam, _ = canonical_process_from_dag(g, float(data.get("b", 0.9)))
        return spec, {}
    raise ValidationError(f"unknown builtin {name!r}")


def load_spec(path: str):
    with open(path) as fh:
        return spec_from_json(json.load(fh))


def parse_subset(text: str | None, named: dict | None = None) -> SubsetSpec:
    """'X'/'all', 'none'/'empty', a named subset (e.g. L1), a '|'-union of
    names, or a list of types."""
    named = named or {}
    if text is None or text.strip().lower() in ("x", "all"):
        return SubsetSpec.everything()
    t = text.strip()
    if t.lower() in ("none", "empty"):
        return SubsetSpec.empty()
    parts = [a.strip() for a in t.split("|")]
    if all(a in named for a in parts):
        return named[parts[0]] if len(parts) == 1 else union([named[a] for a in parts], t)
    return SubsetSpec.of(parse_types(t), name=t)


def finite_float(x: str) -> float:
    v = float(x)
    if not math.isfinite(v):
        raise ValueError(x)
    return v
