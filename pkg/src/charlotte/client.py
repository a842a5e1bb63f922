"""The life of a block: mint it, get it stored, get it attested, and hand
out a reference that carries its evidence.

A commit target says which kind of Fern to ask; ``Client.commit`` runs the
matching flow and returns the block's reference with every attestation it
gathered bundled in.
"""
from __future__ import annotations

import asyncio
from dataclasses import dataclass, field

from .core import (
    ChainSlot, DataBlock, GitBranch, GitCommit, HetconsDecision, HetconsProposal, NakamotoPoW,
    Pattern, Reference, StoreForever, TimestampBatch, verify_reference)
from .fern.policy import EvidenceError
from .store import BlockStore
from .transport import AvailabilityPolicy, Kind, TransportError

DEFAULT_TIMEOUT = 30.0


class CommitError(Exception):
    """A fern flow could not produce the attestations a target needs."""


class AvailabilityFailure(CommitError):
    def __init__(self, need, responders, errors):
        self.need = need
        self.responders = list(responders)
        self.errors = list(errors)
        super().__init__("needed %d availability attestations, got %d (from %s); errors: %s" % (
            need, len(self.responders), ", ".join(map(str, self.responders)) or "none",
            "; ".join(self.errors) or "none"))


# -- targets -------------------------------------------------------------------

@dataclass
class AgreementTarget:
    ferns: list
    f: int
    root: Reference
    slot: int
    parent: Reference

    @property
    def quorum(self) -> int:
        return 2 * self.f + 1


@dataclass
class PowTarget:
    fern: object


@dataclass
class TimestampTarget:
    ferns: list


@dataclass
class BranchTarget:
    fern: object
    branch: str


@dataclass
class HetconsTarget:
    """``ferns`` in the order to try: the driving proposer first, then backups."""

    ferns: list
    chains: list  # (root Reference, slot)
    timeout: float = 10.0


# -- offline checks --------------------------------------------------------------

def _attests_to(att, h, store) -> bool:
    if isinstance(att, ChainSlot):
        return att.block.hash == h
    if isinstance(att, NakamotoPoW):
        # a descendant counts too: it commits to its ancestors
        seen = 0
        while isinstance(att, NakamotoPoW) and seen < 10_000:
            if att.block.hash == h:
                return True
            att = store.get(att.parent.hash)
            seen += 1
        return False
    if isinstance(att, TimestampBatch):
        return any(s.hash == h for s in att.subjects)
    if isinstance(att, GitBranch):
        return att.commit.hash == h
    if isinstance(att, HetconsDecision):
        P = store.get(att.proposal.hash)
        if P is None:
            raise EvidenceError("proposal %s not available" % att.proposal.hash.short())
        if not (isinstance(P, HetconsProposal) and P.block.hash == h):
            return False
        from .fern.hetcons import verify_decision
        return verify_decision(att, store)
    return False


def verify_bundle(ref: Reference, store) -> bool:
    """True if every attestation bundled in ``ref`` is present, signed and
    about ``ref``'s block; missing blocks raise EvidenceError."""
    block = store.get(ref.hash)
    if block is not None and not verify_reference(ref, block):
        return False
    for h in ref.availability:
        att = store.get(h)
        if att is None:
            raise EvidenceError("availability attestation %s not available" % h.short())
        if not (isinstance(att, StoreForever) and att.signature_ok and ref.hash in att.covers()):
            return False
    for r in ref.integrity:
        att = store.get(r.hash)
        if att is None:
            raise EvidenceError("integrity attestation %s not available" % r.hash.short())
        if not att.signature_ok or not _attests_to(att, ref.hash, store):
            return False
    return True


# -- client ----------------------------------------------------------------------

class Client:
    def __init__(self, endpoint, send_everything: bool = True, timeout: float = DEFAULT_TIMEOUT):
        self.endpoint = endpoint
        self.store = BlockStore()
        self.send_everything = send_everything
        self.timeout = timeout

    def mint(self, payload: bytes, parents=(), check: bool = True) -> DataBlock:
        if check:
            for p in parents:
                if not verify_bundle(p, self.store):
                    raise ValueError("parent %s carries an invalid bundle" % p.hash.short())
        b = DataBlock(payload=payload, references=list(parents))
        self.store.add(b)
        return b

    def keep(self, blocks):
        for b in blocks:
            self.store.add(b)

    def _evidence_of(self, block) -> list:
        """Attestation blocks referenced from inside ``block`` that we hold."""
        out = []
        for r in block.embedded_refs():
            for h in list(r.availability) + [i.hash for i in r.integrity]:
                b = self.store.get(h)
                if b is not None and b not in out:
                    out.append(b)
        return out

    async def send(self, dest, block):
        """SendBlocks ``block``, preceded by its referenced attestations when
        send-everything is on."""
        blocks = (self._evidence_of(block) if self.send_everything else []) + [block]
        await self.endpoint.post_blocks(dest, blocks)

    async def replicate(self, block, wilburs, t: int, cover: bool = False) -> list:
        """Send ``block`` to every wilbur and wait for ``t`` attestations."""
        if t > len(wilburs):
            raise ValueError("threshold exceeds the number of wilburs")
        self.store.add(block)
        body = AvailabilityPolicy([block.ref()], cover, 0).encode()

        async def one(w):
            await self.send(w, block)
            return w, await self.endpoint.request(w, Kind.REQ_AVAIL, body, timeout=self.timeout)

        got, ok_from, errors = [], [], []
        tasks = [asyncio.ensure_future(one(w)) for w in wilburs]
        try:
            for fut in asyncio.as_completed(tasks):
                try:
                    w, res = await fut
                except TransportError as e:
                    errors.append(str(e))
                    continue
                if not res.ok:
                    errors.append("%s: %s" % (w, res.error))
                    continue
                att = res.blocks[0]
                if isinstance(att, StoreForever) and att.signature_ok and block.hash in att.covers():
                    got.append(att)
                    ok_from.append(w)
                    self.store.add(att)
                if len(got) >= t:
                    return got
        finally:
            for task in tasks:
                task.cancel()
        raise AvailabilityFailure(t, ok_from, errors)

    # -- commit --------------------------------------------------------------

    async def commit(self, block, attestations, target) -> Reference:
        """Run the fern flow for ``target``; returns ``block``'s reference
        bundling the availability ``attestations`` and the integrity ones."""
        self.store.add(block)
        self.keep(attestations)
        ref = block.ref(availability=[a.hash for a in attestations])
        if isinstance(target, AgreementTarget):
            integ = await self._agreement(ref, attestations, target)
        elif isinstance(target, PowTarget):
            integ = await self._single(target.fern, ref, attestations,
                                       Pattern(NakamotoPoW, block=ref))
        elif isinstance(target, TimestampTarget):
            integ = []
            for f in target.ferns:
                integ += await self._single(f, ref, attestations,
                                            Pattern(TimestampBatch, subjects=[ref]))
        elif isinstance(target, BranchTarget):
            if not isinstance(block, GitCommit):
                raise CommitError("branch targets take commit blocks")
            await self.endpoint.post_blocks(target.fern, [block])
            integ = await self._single(target.fern, ref, attestations,
                                       Pattern(GitBranch, branch_name=target.branch, commit=ref))
        elif isinstance(target, HetconsTarget):
            integ = await self._hetcons(ref, attestations, target)
        else:
            raise TypeError("unknown commit target %r" % (target,))
        return ref.with_attestations(integrity=[a.ref() for a in integ])

    async def _single(self, fern, ref, attestations, pattern) -> list:
        if self.send_everything and attestations:
            await self.endpoint.post_blocks(fern, list(attestations))
        res = await self.endpoint.request(fern, Kind.REQ_INTEGRITY, pattern.encode(),
                                          timeout=self.timeout)
        if not res.ok:
            raise CommitError(res.error)
        self.keep(res.blocks)
        return [res.blocks[0]]

    async def _agreement(self, ref, attestations, tgt: AgreementTarget) -> list:
        pattern = Pattern(ChainSlot, block=ref, root=tgt.root, slot=tgt.slot, parent=tgt.parent)
        body = pattern.encode()
        parent_evidence = [b for b in (self.store.get(r.hash) for r in tgt.parent.integrity) if b]

        async def one(f):
            pre = (list(attestations) + parent_evidence) if self.send_everything else []
            if pre:
                await self.endpoint.post_blocks(f, pre)
            return await self.endpoint.request(f, Kind.REQ_INTEGRITY, body, timeout=self.timeout)

        got, failures = [], []
        tasks = [asyncio.ensure_future(one(f)) for f in tgt.ferns]
        try:
            for fut in asyncio.as_completed(tasks):
                try:
                    res = await fut
                except TransportError as e:
                    failures.append(str(e))
                else:
                    att = res.blocks[0] if res.ok and res.blocks else None
                    if (isinstance(att, ChainSlot) and att.signature_ok
                            and att.block.hash == ref.hash and att.slot == tgt.slot):
                        got.append(att)
                        self.store.add(att)
                    else:
                        failures.append(res.error or "bad attestation")
                if len(got) >= tgt.quorum:
                    return got
                if len(failures) > len(tgt.ferns) - tgt.quorum:
                    break
        finally:
            for task in tasks:
                task.cancel()
        raise CommitError("agreement quorum of %d unreachable: %d attestations, failures: %s"
                          % (tgt.quorum, len(got), "; ".join(failures)))

    async def _hetcons(self, ref, attestations, tgt: HetconsTarget) -> list:
        body = Pattern(HetconsProposal, chains=list(tgt.chains), block=ref).encode()
        errors = []
        for fern in tgt.ferns:
            try:
                if self.send_everything and attestations:
                    await self.endpoint.post_blocks(fern, list(attestations))
                res = await self.endpoint.request(fern, Kind.REQ_INTEGRITY, body, timeout=tgt.timeout)
            except TransportError as e:
                errors.append(str(e))
                continue
            if not res.ok:
                raise CommitError(res.error)
            self.keep(res.blocks)
            self.store.add(HetconsProposal(chains=list(tgt.chains), block=ref))
            return [res.blocks[0]]
        raise CommitError("no hetcons fern answered: " + "; ".join(errors))
