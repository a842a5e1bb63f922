"""The consensus state machine behind the Hetcons Fern, free of blocks,
signatures and networking so it can be model-checked.

Messages are abstract: a ballot ``(counter, proposer)``, a proposal id, the
set of keys ``(chain, slot)`` the proposal covers, the sender, and for 1Bs the
sender's latest 2B per key (``reports``).

Path: proposer sends 1A; every acceptor answers with a 1B broadcast; once an
acceptor holds a 1B quorum for every involved chain it checks that the
highest reported 2B per key names this same proposal (or that there is
none) and broadcasts a 2B; a 2B quorum for every chain decides.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations, product

from ..core import ONE_A, ONE_B, TWO_B

ZERO = (0, b"")


@dataclass(frozen=True)
class Msg:
    phase: int
    ballot: tuple
    proposal: object
    keys: frozenset
    sender: object
    reports: tuple = ()
    uid: object = None

    @property
    def instance(self):
        return (self.ballot, self.proposal)


@dataclass
class Instance:
    keys: frozenset
    one_bs: dict = field(default_factory=dict)  # sender -> Msg
    two_bs: dict = field(default_factory=dict)
    acted: bool = False
    decided: bool = False

    def copy(self):
        return Instance(self.keys, dict(self.one_bs), dict(self.two_bs), self.acted, self.decided)


class ChainSpec:
    """Participants and the quorum predicate of one chain."""

    def __init__(self, participants, is_quorum):
        self.participants = frozenset(participants)
        self.is_quorum = is_quorum

    @classmethod
    def threshold(cls, participants, size: int) -> "ChainSpec":
        return cls(participants, lambda s, p=frozenset(participants), n=size: len(p & set(s)) >= n)


def chains_of(keys) -> list:
    return sorted({k[0] for k in keys}, key=repr)


class AcceptorCore:
    def __init__(self, me, chains):
        """``chains`` maps chain id -> ChainSpec (or is a callable doing so)."""
        self.me = me
        self._chains = chains
        self.promised: dict = {}
        self.last2b: dict = {}
        self.decided: dict = {}
        self.instances: dict = {}

    def chain(self, cid) -> ChainSpec:
        return self._chains(cid) if callable(self._chains) else self._chains[cid]

    def my_keys(self, keys) -> list:
        return sorted((k for k in keys if self.me in self.chain(k[0]).participants), key=repr)

    def _inst(self, m: Msg) -> Instance:
        inst = self.instances.get(m.instance)
        if inst is None:
            inst = self.instances[m.instance] = Instance(m.keys)
        return inst

    def quorate(self, keys, senders) -> bool:
        return all(self.chain(c).is_quorum(senders) for c in chains_of(keys))

    def participant(self, keys, who) -> bool:
        return any(who in self.chain(c).participants for c in chains_of(keys))

    # -- phases --------------------------------------------------------------

    def on_1a(self, m: Msg):
        """Returns the 1B to broadcast, or None."""
        mine = self.my_keys(m.keys)
        if not mine or any(self.promised.get(k, ZERO) >= m.ballot for k in mine):
            return None
        for k in mine:
            self.promised[k] = m.ballot
        reports = []
        for k in sorted(m.keys, key=repr):
            r = self.last2b.get(k)
            if r is not None and r not in reports:
                reports.append(r)
        return Msg(ONE_B, m.ballot, m.proposal, m.keys, self.me, tuple(reports))

    def on_1b(self, m: Msg):
        """Returns ("2b", Msg), ("unsafe", proposal id), ("stale", ballot) or None."""
        if not self.participant(m.keys, m.sender):
            return None
        inst = self._inst(m)
        inst.one_bs.setdefault(m.sender, m)
        if inst.acted or not self.quorate(m.keys, inst.one_bs):
            return None
        inst.acted = True
        mine = self.my_keys(m.keys)
        if not mine:
            return None
        top = max((self.promised.get(k, ZERO) for k in mine))
        if top > m.ballot:
            return ("stale", top)
        verdict = self.safe(m.ballot, m.proposal, m.keys, inst.one_bs.values())
        if verdict is not None:
            return ("unsafe", verdict)
        for k in mine:
            if self.decided.get(k, m.proposal) != m.proposal:
                return ("unsafe", self.decided[k])
        out = Msg(TWO_B, m.ballot, m.proposal, m.keys, self.me,
                  uid=None, reports=())
        for k in mine:
            self.promised[k] = m.ballot
            self.last2b[k] = out
        return ("2b", out)

    @staticmethod
    def safe(ballot, proposal, keys, one_bs):
        """None if ``proposal`` is safe at ``ballot``; otherwise the proposal
        id that the highest reported 2B on some key demands."""
        best: dict = {}
        for ob in one_bs:
            for r in ob.reports:
                if r.phase != TWO_B or r.ballot >= ballot:
                    continue
                for k in r.keys & keys:
                    if k not in best or r.ballot > best[k].ballot:
                        best[k] = r
        for k in sorted(best, key=repr):
            if best[k].proposal != proposal:
                return best[k].proposal
        return None

    def on_2b(self, m: Msg):
        """Returns the proposal id when this 2B completes a decision."""
        if not self.participant(m.keys, m.sender):
            return None
        inst = self._inst(m)
        inst.two_bs.setdefault(m.sender, m)
        if inst.decided or not self.quorate(m.keys, inst.two_bs):
            return None
        inst.decided = True
        for k in m.keys:
            self.decided.setdefault(k, m.proposal)
        return m.proposal

    # -- model-checking support ------------------------------------------------

    def copy(self) -> "AcceptorCore":
        c = AcceptorCore.__new__(AcceptorCore)
        c.me = self.me
        c._chains = self._chains
        c.promised = dict(self.promised)
        c.last2b = dict(self.last2b)
        c.decided = dict(self.decided)
        c.instances = {k: v.copy() for k, v in self.instances.items()}
        return c

    def snapshot(self):
        inst = frozenset(
            (k, frozenset(v.one_bs.items()) if not v.acted else None)
            for k, v in self.instances.items())
        return (frozenset(self.promised.items()), frozenset(self.last2b.items()), inst)


# -- exhaustive safety check ------------------------------------------------------

@dataclass
class CheckReport:
    scenarios: int = 0
    states: int = 0
    violations: list = field(default_factory=list)
    decisions_seen: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def _decided_values(two_bs, byz, keys, quorum_size) -> set:
    """(ballot, proposal) pairs holding a 2B quorum, the Byzantine acceptor
    voting for everything."""
    votes: dict = {}
    for m in two_bs:
        votes.setdefault((m.ballot, m.proposal), set()).add(m.sender)
    out = set()
    for inst, who in votes.items():
        if len(who | {byz}) >= quorum_size:
            out.add(inst)
    return out


def check_safety(n: int = 4, f: int = 1, max_states: int = 2_000_000,
                 only=None) -> CheckReport:
    """Explore every delivery order of a two-ballot, single-slot run with
    ``f`` Byzantine acceptors (here f=1) that equivocate 1Bs (lying about
    their accepted 2B) and 2Bs (voting for every proposal).

    Scenarios cover two ballots with different and equal values, a ballot
    tie broken by proposer id, and a Byzantine proposer sending two 1As at
    one ballot (with and without a later honest ballot).  A violation is two different proposals each backed
    by a 2B quorum.
    """
    if f != 1:
        raise ValueError("the exhaustive checker is sized for f=1")
    ids = list(range(n))
    byz = n - 1
    honest = ids[:-1]
    key = ("c", 1)
    keys = frozenset([key])
    q = 2 * f + 1
    spec = {"c": ChainSpec.threshold(ids, q)}
    rep = CheckReport()
    # the core never looks at who proposed, only at ballot order, so one
    # scenario per shape of (ballot order, values) is exhaustive
    scenarios = [
        (((1, 0), "v1"), ((2, 1), "v2")),
        (((1, 0), "v1"), ((2, 1), "v1")),
        (((1, 0), "v1"), ((1, 1), "v2")),
        # a Byzantine proposer equivocating 1As at one ballot
        (((1, byz), "v1"), ((1, byz), "v2")),
        (((1, byz), "v1"), ((1, byz), "v2"), ((2, 0), "v3")),
    ]
    if only is not None:
        scenarios = [scenarios[i] for i in only]
    for sc in scenarios:
        rep.scenarios += 1
        _explore(sc, honest, byz, keys, spec, q, rep, max_states)
    return rep


def _quorum_choices(pool, senders_needed):
    """Every way to pick one 1B from each of ``senders_needed`` distinct senders."""
    by_sender: dict = {}
    for m in pool:
        by_sender.setdefault(m.sender, []).append(m)
    out = []
    for who in combinations(sorted(by_sender), senders_needed):
        out.extend(product(*(sorted(by_sender[w], key=repr) for w in who)))
    return out


def _explore(scenario, honest, byz, keys, spec, q, rep, max_states):
    # Macro steps: an acceptor's state only changes on a 1A or when a 1B
    # quorum completes (earlier 1Bs are merely recorded), so the steps are
    # "deliver 1A(b) to i" and "i acts on instance I using quorum Q".
    one_as = [Msg(ONE_A, b, v, keys, b[1]) for b, v in scenario]
    instances = sorted({m.instance for m in one_as}, key=repr)
    fake_2bs = [Msg(TWO_B, b, v, keys, byz) for b, v in scenario]
    byz_1bs = []
    for b, v in scenario:
        byz_1bs.append(Msg(ONE_B, b, v, keys, byz, ()))
        for r in fake_2bs:
            if r.ballot < b:
                byz_1bs.append(Msg(ONE_B, b, v, keys, byz, (r,)))
    cores = {i: AcceptorCore(i, spec) for i in honest}
    start = (cores, frozenset((m, i) for m in one_as for i in honest),
             frozenset(), frozenset(), frozenset())
    seen = set()
    stack = [start]
    while stack:
        cores, pending, sent, acted, two_bs = stack.pop()
        sig = (tuple(cores[i].snapshot() for i in honest), pending, sent, acted, two_bs)
        if sig in seen:
            continue
        seen.add(sig)
        rep.states += 1
        if rep.states > max_states:
            raise RuntimeError("state budget exhausted")
        decided = _decided_values(two_bs, byz, keys, q)
        if len({v for _, v in decided}) > 1:
            rep.violations.append((scenario, sorted(decided, key=repr)))
            continue
        rep.decisions_seen += bool(decided)
        for ev in sorted(pending, key=repr):
            m, i = ev
            c = cores[i].copy()
            out = c.on_1a(m)
            nsent = sent | {out} if out is not None else sent
            stack.append(({**cores, i: c}, pending - {ev}, nsent, acted, two_bs))
        for inst in instances:
            pool = [m for m in sent if m.instance == inst]
            pool += [m for m in byz_1bs if m.instance == inst]
            for i in honest:
                if (i, inst) in acted:
                    continue
                for quorum in _quorum_choices(pool, q):
                    c = cores[i].copy()
                    res = None
                    for m in quorum:
                        res = c.on_1b(m) or res
                    nb = two_bs | {res[1]} if res and res[0] == "2b" else two_bs
                    stack.append(({**cores, i: c}, pending, sent, acted | {(i, inst)}, nb))
