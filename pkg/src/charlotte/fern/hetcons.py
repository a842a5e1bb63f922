"""Heterogeneous consensus over chains of slots, with atomic multi-chain
commits (meets).

A chain is named by its root, a DataBlock whose first reference is the
chain's QuorumConfig.  Each chain's proposer is its lowest-id participant; a
meet is driven by the proposer of its lowest-root chain, which first reserves
the slot at the proposer of every other chain (in root order, so proposers
never wait on each other in a cycle).  Ballots run the ``AcceptorCore``
state machine.
"""
from __future__ import annotations

import asyncio
import random

from ..core import (
    ONE_A, ONE_B, TWO_B, DataBlock, HetconsDecision, HetconsMessage, HetconsProposal,
    Hash, Pattern, QuorumConfig, SigningKey)
from ..node import Service
from ..transport import Kind, Result, TransportError
from .agreement import slot_key
from .hetcons_core import AcceptorCore, ChainSpec, Msg
from .ledger import Ledger
from .policy import EvidenceError

CHAIN_TAG = b"hetcons-chain:"
DEFAULT_TIMEOUT = 2.0
DEFAULT_LEASE = 5.0


def make_chain(name: str, config: QuorumConfig) -> DataBlock:
    return DataBlock(payload=CHAIN_TAG + name.encode(), references=[config.ref()])


def chain_config(store, root_hash) -> QuorumConfig | None:
    root = store.get(root_hash)
    if not isinstance(root, DataBlock) or not root.payload.startswith(CHAIN_TAG) or not root.references:
        return None
    cfg = store.get(root.references[0].hash)
    return cfg if isinstance(cfg, QuorumConfig) else None


def proposer_of(config: QuorumConfig):
    return config.participants[0]  # participants are kept sorted by encoding


def lead_chain(proposal: HetconsProposal):
    """Root hash of the chain whose proposer drives ``proposal``."""
    return min((r.hash for r, _ in proposal.chains), key=lambda h: h.digest)


def _key_order(k):
    return (k[0].digest, k[1])


class HetconsFern(Service):
    integrity_types = (HetconsProposal, HetconsMessage)

    def __init__(self, key: SigningKey, directory: dict, ledger: str | None = None,
                 byzantine: bool = False, timeout: float = DEFAULT_TIMEOUT,
                 lease: float = DEFAULT_LEASE, seed=0):
        """``directory`` maps participant CryptoId -> address."""
        self.key = key
        self.me = key.id
        self.directory = directory
        self.ledger = Ledger(ledger)
        self.byzantine = byzantine  # test hook: 1B hides accepted values, 2B for everything
        self.timeout = timeout
        self.lease = lease
        self.rng = random.Random("hetcons:%s:%s" % (seed, self.me.short()))
        self.core = AcceptorCore(self.me, self._spec)
        self._specs: dict = {}
        self._my2b: dict = {}  # instance -> my 2B block
        self._parked: dict = {}  # proposal hash -> messages that arrived first
        self._watch: dict = {}  # proposal hash -> futures
        self._unsafe: dict = {}  # proposal hash -> proposal hash it must yield to
        self._locks: dict = {}
        self.decisions: dict = {}  # proposal hash -> 2B refs of the deciding quorum
        self.issued: list = []
        self.ballots_started = 0
        self._counter_seen: dict = {}

    def attach(self, node):
        super().attach(node)
        # slot_key is the root hash encoding followed by a u64 slot
        for k, v in self.ledger.items():
            self.core.decided[(Hash.decode(k[:-8]), int.from_bytes(k[-8:], "big"))] = Hash.decode(v)

    # -- chain lookup ----------------------------------------------------------

    def _spec(self, root_hash) -> ChainSpec:
        spec = self._specs.get(root_hash)
        if spec is None:
            cfg = chain_config(self.node.store, root_hash)
            if cfg is None:
                raise KeyError("unknown chain %s" % root_hash.short())
            spec = self._specs[root_hash] = ChainSpec(cfg.participants, cfg.is_quorum)
        return spec

    def known(self, proposal) -> bool:
        return all(chain_config(self.node.store, r.hash) is not None for r, _ in proposal.chains)

    def config(self, root_hash) -> QuorumConfig:
        return chain_config(self.node.store, root_hash)

    def audience(self, proposal) -> list:
        ids = set()
        for r, _ in proposal.chains:
            ids.update(self.config(r.hash).participants)
        return [self.directory[i] for i in sorted(ids, key=lambda c: c.encode())
                if i != self.me and i in self.directory]

    def decided(self, root_hash, slot):
        return self.core.decided.get((root_hash, slot))

    # -- inbound messages --------------------------------------------------------

    def on_block(self, block, sender, new):
        if not new:
            return
        if isinstance(block, HetconsProposal):
            for m in self._parked.pop(block.hash, ()):
                self._on_message(m)
        elif isinstance(block, HetconsMessage) and block.signature_ok:
            self._on_message(block)

    def _on_message(self, m: HetconsMessage):
        P = self.node.store.get(m.proposal.hash)
        if not isinstance(P, HetconsProposal):
            self._parked.setdefault(m.proposal.hash, []).append(m)
            return
        if not self.known(P):
            return
        keys = frozenset(P.keys())
        for k in keys:
            if m.counter > self._counter_seen.get(k, 0):
                self._counter_seen[k] = m.counter
        if m.phase == ONE_A:
            if m.sender != m.proposer:
                return
            if self.byzantine:
                self._byzantine_reply(m, P)
                return
            out = self.core.on_1a(Msg(ONE_A, m.ballot, P.hash, keys, m.sender, uid=m.hash))
            if out is not None:
                self._send_1b(m, P, out)
        elif m.phase == ONE_B:
            reports = tuple(self._reports(m))
            res = self.core.on_1b(Msg(ONE_B, m.ballot, P.hash, keys, m.sender, reports, uid=m.hash))
            if res is None or self.byzantine:
                return
            if res[0] == "2b":
                self._send_2b(m, P)
            elif res[0] == "unsafe" and m.proposer == self.me:
                self._unsafe[P.hash] = res[1]
                self._wake(P.hash)
        elif m.phase == TWO_B:
            done = self.core.on_2b(Msg(TWO_B, m.ballot, P.hash, keys, m.sender, uid=m.hash))
            if done is not None:
                self._record(P, m.ballot)

    def _reports(self, one_b):
        """The 2Bs a 1B carries, keeping only those with a valid 1B quorum behind them."""
        store = self.node.store
        for r in one_b.justification:
            b = store.get(r.hash)
            if isinstance(b, HetconsMessage) and b.phase == TWO_B and self.valid_2b(b):
                P = store.get(b.proposal.hash)
                yield Msg(TWO_B, b.ballot, P.hash, frozenset(P.keys()), b.sender, uid=b.hash)

    def valid_2b(self, b: HetconsMessage) -> bool:
        store = self.node.store
        P = store.get(b.proposal.hash)
        if not b.signature_ok or not isinstance(P, HetconsProposal) or not self.known(P):
            return False
        senders = set()
        for r in b.justification:
            ob = store.get(r.hash)
            if (isinstance(ob, HetconsMessage) and ob.phase == ONE_B and ob.signature_ok
                    and ob.ballot == b.ballot and ob.proposal.hash == P.hash):
                senders.add(ob.sender)
        return all(self.config(r.hash).is_quorum(senders) for r, _ in P.chains)

    # -- outbound messages -------------------------------------------------------

    def _sign(self, phase, ballot_of: HetconsMessage, P, justification):
        return HetconsMessage.signed(
            self.key, phase=phase, counter=ballot_of.counter, proposer=ballot_of.proposer,
            proposal=P.ref(), justification=justification)

    def _deps_of_2b(self, b):
        store = self.node.store
        out = [store.get(b.proposal.hash)]
        for r in b.justification:
            ob = store.get(r.hash)
            if ob is not None:
                one_a = [store.get(x.hash) for x in ob.justification]
                out.extend(x for x in one_a if isinstance(x, HetconsMessage) and x.phase == ONE_A)
                out.append(ob)
        out.append(b)
        return out

    def _emit(self, P, blocks):
        blocks = [b for i, b in enumerate(blocks) if b is not None and b not in blocks[:i]]
        self.node.broadcast(self.audience(P), blocks)
        self.node.accept_local(blocks[-1])

    def _send_1b(self, one_a, P, out: Msg):
        reported = [self._my2b[r.instance] for r in out.reports]
        just = [one_a.ref()] + [b.ref() for b in reported]
        ob = self._sign(ONE_B, one_a, P, just)
        deps = [P, one_a]
        for b in reported:
            deps.extend(self._deps_of_2b(b))
        self._emit(P, deps + [ob])

    def _send_2b(self, trigger, P):
        inst = self.core.instances[(trigger.ballot, P.hash)]
        store = self.node.store
        just = [store.get(m.uid).ref() for m in inst.one_bs.values()]
        tb = self._sign(TWO_B, trigger, P, just)
        self._my2b[(trigger.ballot, P.hash)] = tb
        self._emit(P, [P, tb])

    def _byzantine_reply(self, one_a, P):
        ob = self._sign(ONE_B, one_a, P, [one_a.ref()])
        tb = self._sign(TWO_B, one_a, P, [])
        self._emit(P, [P, one_a, ob])
        self._emit(P, [P, tb])

    # -- decisions ---------------------------------------------------------------

    def _record(self, P, ballot):
        inst = self.core.instances[(ballot, P.hash)]
        store = self.node.store
        self.decisions.setdefault(P.hash, [store.get(m.uid).ref() for m in inst.two_bs.values()])
        for root, slot in P.keys():
            self.ledger.put_once(slot_key(root, slot), P.hash.encode())
        self._wake(P.hash)

    def _wake(self, ph):
        for fut in self._watch.pop(ph, ()):
            if not fut.done():
                fut.set_result(None)

    def decision_result(self, P) -> Result:
        """A signed decision over ``P`` plus the 2Bs that justify it."""
        refs = self.decisions[P.hash]
        dec = HetconsDecision.signed(self.key, proposal=P.ref(), quorum_2b=refs)
        self.node.accept_local(dec)
        self.issued.append(dec)
        twos = tuple(self.node.store.get(r.hash) for r in refs)
        return Result(refs=(dec.ref(),), blocks=(dec,) + twos)

    def _conflict(self, P):
        """Refusal text if some slot of ``P`` is decided for another proposal."""
        for root, slot in sorted(P.keys(), key=_key_order):
            d = self.core.decided.get((root, slot))
            if d is not None and d != P.hash:
                winner = self.node.store.get(d)
                held = winner.block.hash.hex() if isinstance(winner, HetconsProposal) else d.hex()
                tip = max(s for r, s in self.core.decided if r == root)
                return "refused: slot %d of chain %s already holds %s; highest decided slot %d" % (
                    slot, root.short(), held, tip)
        return None

    def _settled(self, P):
        if P.hash in self.decisions:
            return self.decision_result(P)
        msg = self._conflict(P)
        return Result(error=msg) if msg else None

    # -- requests ---------------------------------------------------------------

    async def on_integrity(self, req, sender) -> Result:
        store = self.node.store
        if req.cls is HetconsMessage:
            req.require("proposal")
            P = await store.wait_for(req.get("proposal").hash, 0.0)
            if not isinstance(P, HetconsProposal):
                return Result(error="evidence: proposal not available")
            return await self._reserve(P)
        req.require("chains", "block")
        P = HetconsProposal(chains=req.get("chains"), block=req.get("block"))
        self.node.accept_local(P)
        if not self.known(P):
            return Result(error="policy: meet names a chain this fern does not know")
        return await self.propose(P)

    def _lock(self, k) -> asyncio.Lock:
        lk = self._locks.get(k)
        if lk is None:
            lk = self._locks[k] = asyncio.Lock()
        return lk

    def _owned_keys(self, P) -> list:
        return sorted((k for k in P.keys() if proposer_of(self.config(k[0])) == self.me),
                      key=_key_order)

    async def _reserve(self, P) -> Result:
        """Hold our chains' slots of a meet another proposer drives."""
        if not self.known(P):
            return Result(error="policy: meet names a chain this fern does not know")
        held = []
        for k in self._owned_keys(P):
            await self._lock(k).acquire()
            held.append(k)
        msg = self._conflict(P)
        if msg or P.hash in self.decisions:
            for k in held:
                self._lock(k).release()
            return Result(error=msg) if msg else Result()
        self.node.spawn(self._hold(P, held))
        return Result()

    async def _hold(self, P, held):
        try:
            await self._until_settled(P, self.lease)
        finally:
            for k in held:
                self._lock(k).release()

    async def _until_settled(self, P, timeout) -> bool:
        if P.hash in self.decisions:
            return True
        fut = asyncio.get_running_loop().create_future()
        self._watch.setdefault(P.hash, []).append(fut)
        try:
            await asyncio.wait_for(fut, timeout)
        except asyncio.TimeoutError:
            return False
        return True

    async def propose(self, P) -> Result:
        done = self._settled(P)
        if done is not None:
            return done
        held = []
        try:
            for root in sorted({r.hash for r, _ in P.chains}, key=lambda h: h.digest):
                lead = proposer_of(self.config(root))
                if lead == self.me:
                    for k in sorted((k for k in P.keys() if k[0] == root), key=_key_order):
                        await self._lock(k).acquire()
                        held.append(k)
                else:
                    err = await self._reserve_remote(lead, P)
                    if err:
                        return Result(error=err)
            done = self._settled(P)
            if done is not None:
                return done
            target = await self._drive(P)
        finally:
            for k in held:
                self._lock(k).release()
        if target == P.hash:
            return self.decision_result(P)
        return Result(error=self._conflict(P) or "refused: superseded")

    async def _reserve_remote(self, lead, P) -> str | None:
        addr = self.directory.get(lead)
        if addr is None:
            return None
        ep = self.node.endpoint
        try:
            await ep.post_blocks(addr, [P])
            res = await ep.request(
                addr, Kind.REQ_INTEGRITY,
                Pattern(HetconsMessage, phase=ONE_A, proposal=P.ref()).encode(), timeout=self.lease)
        except TransportError:
            return None  # proposer unreachable: ballots alone keep us safe
        return res.error or None

    async def _drive(self, P):
        """Run ballots until some proposal decides the slots of ``P``; returns its hash."""
        target = P
        attempt = 0
        while True:
            if target.hash in self.decisions:
                return target.hash
            if self._conflict(P):
                return None
            counter = 1 + max(self._counter_seen.get(k, 0) for k in target.keys())
            one_a = HetconsMessage.signed(
                self.key, phase=ONE_A, counter=counter, proposer=self.me,
                proposal=target.ref(), justification=[])
            self.ballots_started += 1
            self._emit(target, [target, one_a])
            wait = self.timeout * (2 ** attempt) * self.rng.uniform(1.0, 1.5)
            settled = await self._until_settled(target, wait)
            if settled and target.hash in self.decisions:
                return target.hash
            other = self._unsafe.pop(target.hash, None)
            if other is not None:
                nxt = self.node.store.get(other)
                if isinstance(nxt, HetconsProposal):
                    target = nxt
                    continue
            attempt += 1


def verify_decision(decision: HetconsDecision, store) -> bool:
    """Check a decision against its 2B quorum; raises EvidenceError when a
    referenced block (proposal, 2B, chain root or config) is missing."""
    if not isinstance(decision, HetconsDecision) or not decision.signature_ok:
        return False
    P = store.get(decision.proposal.hash)
    if P is None:
        raise EvidenceError("proposal %s not available" % decision.proposal.hash.short())
    if not isinstance(P, HetconsProposal):
        return False
    twos = []
    for r in decision.quorum_2b:
        b = store.get(r.hash)
        if b is None:
            raise EvidenceError("2B %s not available" % r.hash.short())
        twos.append(b)
    if not twos:
        return False
    ballots = set()
    for b in twos:
        if not (isinstance(b, HetconsMessage) and b.phase == TWO_B and b.signature_ok
                and b.proposal.hash == P.hash):
            return False
        ballots.add(b.ballot)
    if len(ballots) != 1:
        return False
    senders = {b.sender for b in twos}
    for r, _ in P.chains:
        cfg = chain_config(store, r.hash)
        if cfg is None:
            raise EvidenceError("configuration of chain %s not available" % r.hash.short())
        if not cfg.is_quorum(senders):
            return False
    return True
