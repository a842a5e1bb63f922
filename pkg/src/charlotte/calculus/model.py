"""Finite universes, beliefs, refinement and views.

Block ids are any hashable, orderable labels (strings in hand-written
models, Hash values in extracted ones).  Everything is an immutable value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain, combinations, product
from typing import Iterable


class NotAState(ValueError):
    """Raised when a query names a state outside the ADDS."""


def _closure(pairs) -> frozenset:
    rel = set(pairs)
    changed = True
    while changed:
        changed = False
        for (a, b) in list(rel):
            for (c, d) in list(rel):
                if b == c and (a, d) not in rel:
                    rel.add((a, d))
                    changed = True
    return frozenset(rel)


@dataclass(frozen=True)
class Universe:
    exist: frozenset
    avail: frozenset = frozenset()
    before: frozenset = frozenset()  # transitively closed strict order, pairs (earlier, later)

    def __post_init__(self):
        object.__setattr__(self, "exist", frozenset(self.exist))
        object.__setattr__(self, "avail", frozenset(self.avail))
        closed = _closure(self.before)
        object.__setattr__(self, "before", closed)
        if not self.avail <= self.exist:
            raise ValueError("available blocks must exist: %s" % sorted(self.avail - self.exist))
        for a, b in closed:
            if a == b:
                raise ValueError("observation order is not irreflexive at %r" % (a,))
            if a not in self.exist or b not in self.exist:
                raise ValueError("order mentions a block that cannot exist")

    def predecessors(self, b) -> frozenset:
        return frozenset(a for (a, c) in self.before if c == b)

    def label(self) -> str:
        def s(x):
            return "{" + ",".join(map(str, sorted(x))) + "}"
        return "E%s A%s" % (s(self.exist), s(self.avail))


class Belief:
    """A set of universes.  The empty belief is legal but degenerate."""

    __slots__ = ("universes",)

    def __init__(self, universes: Iterable[Universe] = ()):
        object.__setattr__(self, "universes", frozenset(universes))

    def __setattr__(self, k, v):
        raise AttributeError("Belief is immutable")

    @property
    def degenerate(self) -> bool:
        return not self.universes

    def diagnostics(self) -> list:
        return ["empty belief: every predicate holds vacuously"] if self.degenerate else []

    def __iter__(self):
        return iter(self.universes)

    def __len__(self):
        return len(self.universes)

    def __contains__(self, u):
        return u in self.universes

    def __eq__(self, other):
        return isinstance(other, Belief) and self.universes == other.universes

    def __hash__(self):
        return hash(self.universes)

    def __le__(self, other):
        return self.universes <= other.universes

    # beliefs compose like the trust combinations they express
    def __and__(self, other):
        return Belief(self.universes & other.universes)

    def __or__(self, other):
        return Belief(self.universes | other.universes)

    def filter(self, pred) -> "Belief":
        return Belief(u for u in self.universes if pred(u))

    def __repr__(self):
        return "Belief(%d universes)" % len(self.universes)


State = frozenset


def state(*blocks) -> frozenset:
    return frozenset(blocks)


@dataclass(frozen=True)
class Adds:
    states: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "states", frozenset(frozenset(s) for s in self.states))

    def __contains__(self, s):
        return frozenset(s) in self.states

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)


def adds(*states) -> Adds:
    return Adds(frozenset(frozenset(s) for s in states))


# -- operations --------------------------------------------------------------

def refine(belief: Belief, observed: list) -> Belief:
    """Keep universes where every observed block can exist and the
    observation order respects the universe's order."""
    pos = {}
    for i, b in enumerate(observed):
        pos.setdefault(b, i)
    obs = frozenset(pos)

    def ok(u: Universe) -> bool:
        if not obs <= u.exist:
            return False
        for (a, b) in u.before:
            if b in pos and (a not in pos or pos[a] >= pos[b]):
                return False
        return True

    return belief.filter(ok)


def is_available(belief: Belief, blocks) -> bool:
    blocks = frozenset(blocks)
    return all(blocks <= u.avail for u in belief)


def is_incontrovertible(belief: Belief, d: Adds, s) -> bool:
    s = frozenset(s)
    if s not in d.states:
        raise NotAState("state %s is not a member of the ADDS" % sorted(s, key=str))
    return all((s | t) in d.states or not t <= u.exist
               for u in belief for t in d.states)


def view(belief: Belief, d: Adds) -> frozenset:
    out = set()
    for s in d.states:
        if all(t <= s or not t <= u.exist for u in belief for t in d.states) \
                and all(s <= u.avail for u in belief):
            out |= s
    return frozenset(out)


def adds_union(d1: Adds, d2: Adds) -> Adds:
    return Adds(frozenset(s | t for s in d1.states for t in d2.states))


def adds_intersection(d1: Adds, d2: Adds) -> Adds:
    return Adds(frozenset(s & t for s in d1.states for t in d2.states))


# -- universe enumeration ----------------------------------------------------

def powerset(items) -> list:
    items = sorted(items, key=str)
    return [frozenset(c) for c in chain.from_iterable(
        combinations(items, r) for r in range(len(items) + 1))]


def strict_partial_orders(items) -> list:
    """Every transitively closed irreflexive antisymmetric relation on items."""
    items = sorted(items, key=str)
    pairs = [(a, b) for a in items for b in items if a != b]
    out = []
    seen = set()
    for bits in product((0, 1), repeat=len(pairs)):
        rel = frozenset(p for p, bit in zip(pairs, bits) if bit)
        if any((b, a) in rel for (a, b) in rel):
            continue
        if _closure(rel) != rel:
            continue
        if rel not in seen:
            seen.add(rel)
            out.append(rel)
    return out


def all_universes(blocks, with_orders: bool = False) -> list:
    """Every (exist, avail) pair; optionally every strict order on exist too."""
    out = []
    for ex in powerset(blocks):
        orders = strict_partial_orders(ex) if with_orders else [frozenset()]
        for av in powerset(ex):
            for o in orders:
                out.append(Universe(ex, av, o))
    return out
