"""Named subsets of a typeset, given by a membership predicate."""
from __future__ import annotations

from typing import Callable, Iterable


class SubsetSpec:
    def __init__(self, name: str, member: Callable, known_finite: bool | None = None,
                 elements: frozenset | None = None):
        self.name = name
        self.member = member
        self.known_finite = known_finite
        self.elements = elements  # only for explicitly listed sets

    def __contains__(self, t):
        try:
            return bool(self.member(t))
        except TypeError:
            return False

    def __call__(self, t):
        return t in self

    @classmethod
    def of(cls, items: Iterable, name: str | None = None):
        els = frozenset(items)
        if name is None:
            name = "{" + ",".join(sorted(map(str, els))) + "}"
        return cls(name, els.__contains__, True, els)

    @classmethod
    def empty(cls):
        return cls.of((), "empty")

    @classmethod
    def everything(cls, name="X"):
        return cls(name, lambda t: True, False)

    @property
    def is_empty(self):
        return self.elements is not None and not self.elements

    def in_window(self, window) -> list:
        return [t for t in window if t in self]

    def __or__(self, other):
        els = None
        if self.elements is not None and other.elements is not None:
            els = self.elements | other.elements
        fin = bool(self.known_finite and other.known_finite) or None
        return SubsetSpec(f"{self.name}|{other.name}", lambda t: t in self or t in other, fin, els)

    def __invert__(self):
        return SubsetSpec(f"~{self.name}", lambda t: t not in self, None)

    def __repr__(self):
        return f"SubsetSpec({self.name!r})"


def union(subsets, name=None):
    subsets = list(subsets)
    if not subsets:
        return SubsetSpec.empty()
    out = subsets[0]
    for s in subsets[1:]:
        out = out | s
    if name:
        out.name = name
    return out
