"""Exhaustive checking of the view/union and view/intersection identities.

Enumerating beliefs literally is hopeless (a belief is any set of
universes), but ``view`` only reads a belief through two quantities:

* A = the intersection of ``avail`` over its universes, and
* the maximal ``exist`` sets among its universes (a nonempty antichain M
  with A inside every member).

Every belief maps to exactly one such (A, M) pair and every pair is
realised by the belief {(m, A) : m in M}, so sweeping the pairs (plus the
empty belief) covers all beliefs.  States are bitmasks over the ground set,
an ADDS is a bitmask over states.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Adds, Belief, Universe, view as direct_view

EMPTY_BELIEF = None


def _subsets(mask: int):
    s = mask
    while True:
        yield s
        if s == 0:
            return
        s = (s - 1) & mask


def antichains(n: int) -> list:
    sets = list(range(1 << n))
    out = []

    def extend(chosen, start):
        if chosen:
            out.append(tuple(chosen))
        for i in range(start, len(sets)):
            s = sets[i]
            if all((s & c) != s and (s & c) != c for c in chosen):
                chosen.append(s)
                extend(chosen, i + 1)
                chosen.pop()

    extend([], 0)
    return out


def canonical_beliefs(n: int) -> list:
    """(A, M) pairs, preceded by the empty belief (None)."""
    full = (1 << n) - 1
    out = [EMPTY_BELIEF]
    for m in antichains(n):
        meet = full
        for e in m:
            meet &= e
        for a in sorted(_subsets(meet)):
            out.append((a, m))
    return out


def view_mask(belief, d: int, n: int) -> int:
    states = [s for s in range(1 << n) if d >> s & 1]
    if belief is EMPTY_BELIEF:
        out = 0
        for s in states:
            out |= s
        return out
    a, maximal = belief
    out = 0
    for s in states:
        if s & a != s:
            continue
        ok = True
        for m in maximal:
            for t in states:
                if t & m == t and t & s != t:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out |= s
    return out


def _combine_table(n: int, op) -> np.ndarray:
    ns = 1 << n
    nd = 1 << ns
    dtype = np.uint32 if ns <= 32 else np.uint64
    rows = np.zeros((ns, nd), dtype=dtype)
    for s in range(ns):
        for d in range(nd):
            acc = 0
            for t in range(ns):
                if d >> t & 1:
                    acc |= 1 << op(s, t)
            rows[s, d] = acc
    table = np.zeros((nd, nd), dtype=dtype)
    for d1 in range(nd):
        acc = np.zeros(nd, dtype=dtype)
        for s in range(ns):
            if d1 >> s & 1:
                acc |= rows[s]
        table[d1] = acc
    return table


@dataclass
class TheoremReport:
    ground: int
    beliefs: int
    adds: int
    union_violations: int = 0
    intersection_violations: int = 0
    union_lhs_not_in_rhs: int = 0
    union_rhs_not_in_lhs: int = 0
    inter_lhs_not_in_rhs: int = 0
    inter_rhs_not_in_lhs: int = 0
    union_nondegenerate: int = 0
    intersection_nondegenerate: int = 0
    union_examples: list = field(default_factory=list)
    intersection_examples: list = field(default_factory=list)

    @property
    def checked(self) -> int:
        return self.beliefs * self.adds * self.adds

    @property
    def holds(self) -> bool:
        return self.union_violations == 0 and self.intersection_violations == 0


def check_composition_theorems(n: int = 3, examples: int = 5) -> TheoremReport:
    if n > 3:
        raise ValueError("pairwise ADDS enumeration is only tractable for n <= 3")
    beliefs = canonical_beliefs(n)
    nd = 1 << (1 << n)
    views = np.array([[view_mask(b, d, n) for d in range(nd)] for b in beliefs], dtype=np.uint8)
    rep = TheoremReport(n, len(beliefs), nd)
    for name, op, combine in (("union", lambda s, t: s | t, np.bitwise_or),
                              ("intersection", lambda s, t: s & t, np.bitwise_and)):
        table = _combine_table(n, op).astype(np.int64)
        lhs = views[:, table]  # (beliefs, nd, nd)
        rhs = combine(views[:, :, None], views[:, None, :])
        bad = lhs != rhs
        l_not_r = (lhs & ~rhs) != 0
        r_not_l = (rhs & ~lhs) != 0
        # the empty belief and the empty ADDS are legal but trivially break
        # both identities; count and sample the remaining cases separately
        core = bad.copy()
        core[0] = False
        core[:, 0, :] = False
        core[:, :, 0] = False
        idx = np.argwhere(core)[:examples]
        found = [(beliefs[i], int(d1), int(d2), int(lhs[i, d1, d2]), int(rhs[i, d1, d2]))
                 for i, d1, d2 in idx]
        if name == "union":
            rep.union_violations = int(bad.sum())
            rep.union_lhs_not_in_rhs = int(l_not_r.sum())
            rep.union_rhs_not_in_lhs = int(r_not_l.sum())
            rep.union_nondegenerate = int(core.sum())
            rep.union_examples = found
        else:
            rep.intersection_violations = int(bad.sum())
            rep.inter_lhs_not_in_rhs = int(l_not_r.sum())
            rep.inter_rhs_not_in_lhs = int(r_not_l.sum())
            rep.intersection_nondegenerate = int(core.sum())
            rep.intersection_examples = found
    return rep


# -- bridges to the explicit model ------------------------------------------

def ground_labels(n: int) -> list:
    return [chr(ord("a") + i) for i in range(n)]


def mask_to_state(mask: int, labels) -> frozenset:
    return frozenset(l for i, l in enumerate(labels) if mask >> i & 1)


def adds_from_mask(d: int, labels) -> Adds:
    return Adds(frozenset(mask_to_state(s, labels) for s in range(1 << len(labels)) if d >> s & 1))


def belief_from_canonical(b, labels) -> Belief:
    if b is EMPTY_BELIEF:
        return Belief()
    a, maximal = b
    av = mask_to_state(a, labels)
    return Belief(Universe(mask_to_state(m, labels), av) for m in maximal)


def canonicalize(belief: Belief, labels):
    """Map an explicit belief to its (A, M) class."""
    if belief.degenerate:
        return EMPTY_BELIEF
    idx = {l: i for i, l in enumerate(labels)}

    def mask(s):
        return sum(1 << idx[x] for x in s)

    a = (1 << len(labels)) - 1
    exists = set()
    for u in belief:
        a &= mask(u.avail)
        exists.add(mask(u.exist))
    maximal = tuple(sorted(e for e in exists if not any(e != f and e & f == e for f in exists)))
    return (a, maximal)


def describe(b, labels) -> str:
    if b is EMPTY_BELIEF:
        return "empty belief"
    a, maximal = b
    fmt = lambda m: "{" + ",".join(sorted(mask_to_state(m, labels))) + "}"
    return "avail-everywhere=%s maximal-exist=%s" % (fmt(a), " ".join(fmt(m) for m in maximal))


def describe_adds(d: int, labels) -> str:
    fmt = lambda m: "{" + ",".join(sorted(mask_to_state(m, labels))) + "}"
    return "{" + " ".join(fmt(s) for s in range(1 << len(labels)) if d >> s & 1) + "}"


def direct_check(b, d1: int, d2: int, labels, op: str) -> tuple:
    """Recompute one identity instance through the explicit model code."""
    from .model import adds_intersection, adds_union
    bel = belief_from_canonical(b, labels)
    x, y = adds_from_mask(d1, labels), adds_from_mask(d2, labels)
    if op == "union":
        return direct_view(bel, adds_union(x, y)), direct_view(bel, x) | direct_view(bel, y)
    return direct_view(bel, adds_intersection(x, y)), direct_view(bel, x) & direct_view(bel, y)
