"""Attestation types read as beliefs: the universes in which they are inviolate."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from itertools import combinations

from .model import Adds, Belief, Universe, all_universes

STORE = "store"
COMMIT = "commit"


@dataclass(frozen=True)
class Attestation:
    kind: str  # STORE or COMMIT
    issuer: str
    subjects: frozenset  # blocks made available (store) or the committed block (commit)
    key: object = None  # commit slot (or frozenset of slots for a meet); disjoint keys never conflict

    def __post_init__(self):
        if self.kind not in (STORE, COMMIT):
            raise ValueError("unknown attestation kind %r" % self.kind)
        object.__setattr__(self, "subjects", frozenset(self.subjects))
        if self.kind == COMMIT and len(self.subjects) != 1:
            raise ValueError("a commit attestation names exactly one block")

    @property
    def keys(self) -> frozenset:
        return self.key if isinstance(self.key, frozenset) else frozenset([self.key])


@dataclass
class Model:
    blocks: list
    attestations: dict = field(default_factory=dict)  # block id -> Attestation
    universes: list = field(default_factory=list)
    adds: dict = field(default_factory=dict)  # name -> Adds
    trust: list = field(default_factory=list)  # (kind, issuer) pairs

    def everything(self) -> Belief:
        return Belief(self.universes)

    def initial_belief(self) -> Belief:
        """The observer's prior: intersection of every trusted interpretation."""
        b = self.everything()
        for kind, issuer in self.trust:
            fn = interpret_store_forever if kind == STORE else interpret_exclusive_commit
            b = b & fn(issuer, self)
        return b

    def fill_all_universes(self, with_orders: bool = False):
        self.universes = all_universes(self.blocks, with_orders)
        return self


def _by(model: Model, kind: str, issuer: str):
    return [(bid, a) for bid, a in sorted(model.attestations.items(), key=lambda kv: str(kv[0]))
            if a.kind == kind and a.issuer == issuer]


def store_forever_holds(u: Universe, atts) -> bool:
    return all(a.subjects <= u.avail for bid, a in atts if bid in u.exist)


def exclusive_commit_holds(u: Universe, atts) -> bool:
    present = [a for bid, a in atts if bid in u.exist]
    for a, b in combinations(present, 2):
        if a.keys & b.keys and a.subjects != b.subjects:
            return False
    return True


def interpret_store_forever(issuer: str, model: Model) -> Belief:
    atts = _by(model, STORE, issuer)
    return Belief(u for u in model.universes if store_forever_holds(u, atts))


def interpret_exclusive_commit(issuer: str, model: Model) -> Belief:
    atts = _by(model, COMMIT, issuer)
    return Belief(u for u in model.universes if exclusive_commit_holds(u, atts))


def quorum_belief(beliefs: dict, quorums) -> Belief:
    """Union over quorums of the intersection of their members' beliefs."""
    out = Belief()
    for q in quorums:
        out = out | reduce(lambda x, y: x & y, (beliefs[m] for m in q))
    return out


def meet(*types: Belief) -> Belief:
    """Meet of attestation types, read as intersection of beliefs."""
    return reduce(lambda x, y: x & y, types)


def availability_monotonicity_violations(belief: Belief, limit: int = 10) -> list:
    """Triples (U, V, W) breaking: exist U ∪ exist V ⊆ exist W ⇒ avail U ∪ avail V ⊆ avail W."""
    us = sorted(belief.universes, key=Universe.label)
    out = []
    for w in us:
        below = [u for u in us if u.exist <= w.exist]
        for u in below:
            if not u.avail <= w.avail:
                # V = U suffices for a witness
                out.append((u, u, w))
                if len(out) >= limit:
                    return out
    return out


def main_chain_ordered(u: Universe, height: dict, main) -> bool:
    """Helper predicate: each main-chain block precedes every other existing
    block of equal height in the universe's order."""
    main = set(main)
    for m in main:
        if m not in u.exist:
            continue
        for b in u.exist:
            if b != m and b not in main and height.get(b) == height.get(m):
                if (m, b) not in u.before:
                    return False
    return True
