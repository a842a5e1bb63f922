"""Agreement chains: one exclusive signed attestation per (root, slot)."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..core import ChainSlot, SigningKey, wire
from ..node import Service
from ..transport import Result
from .ledger import Ledger
from .policy import Requirement, availability_shortfall, fetch_all


@dataclass(frozen=True)
class AgreementConfig:
    parent_integrity: Requirement = field(default_factory=Requirement)
    block_availability: Requirement = field(default_factory=Requirement)


def quorum_size(f: int) -> int:
    return 2 * f + 1


def slot_key(root_hash, slot: int) -> bytes:
    return root_hash.encode() + wire.u64(slot)


class AgreementFern(Service):
    integrity_types = (ChainSlot,)

    def __init__(self, key: SigningKey, config: AgreementConfig | None = None,
                 ledger: str | None = None, equivocate: bool = False,
                 evidence_wait: float = 0.0):
        self.key = key
        self.config = config or AgreementConfig()
        self.ledger = Ledger(ledger)
        self.equivocate = equivocate  # test hook: a faulty Fern signs anything
        self.evidence_wait = evidence_wait
        self.issued: list = []

    async def parent_shortfall(self, root, slot, parent) -> str | None:
        req = self.config.parent_integrity
        if slot == 1 or req.count == 0:
            return None
        ok = set()
        for att in await fetch_all(self.node.store, [r.hash for r in parent.integrity], self.evidence_wait):
            if (isinstance(att, ChainSlot) and att.signature_ok and req.accepts(att.issuer)
                    and att.root.hash == root.hash and att.slot == slot - 1
                    and att.block.hash == parent.hash):
                ok.add(att.issuer)
        if len(ok) < req.count:
            return "parent %s has %d of %d required slot-%d attestations" % (
                parent.hash.short(), len(ok), req.count, slot - 1)
        return None

    async def on_integrity(self, req, sender) -> Result:
        req.require("block", "root", "slot", "parent")
        block, root, slot, parent = (req.get(n) for n in ("block", "root", "slot", "parent"))
        if slot < 1 or (slot == 1 and parent.hash != root.hash):
            return Result(error="policy: slot 1 must name the root as parent (slots start at 1)")
        problems = [p for p in (
            await availability_shortfall(self.node.store, block, self.config.block_availability,
                                         self.evidence_wait),
            await self.parent_shortfall(root, slot, parent)) if p]
        if problems:
            return Result(error="policy: " + "; ".join(problems))
        # check-and-set runs without yielding, so it is atomic on the loop
        if not self.equivocate:
            prev = self.ledger.put_once(slot_key(root.hash, slot), block.hash.encode())
            if prev is not None and prev != block.hash.encode():
                return Result(error="refused: slot %d of chain %s already holds %s" % (
                    slot, root.hash.short(), prev[1:].hex()))
        att = ChainSlot.signed(self.key, block=block, root=root, slot=slot, parent=parent)
        if self.node.accept_local(att):
            self.issued.append(att)
        return Result(refs=(att.ref(),), blocks=(att,))


def conflicting_quorums(attestations, quorum: int) -> list:
    """(root, slot) keys at which two different blocks each hold ``quorum``
    attestations from distinct issuers."""
    tally: dict = {}
    for a in attestations:
        if not a.signature_ok:
            continue
        tally.setdefault((a.root.hash, a.slot), {}).setdefault(a.block.hash, set()).add(a.issuer)
    bad = []
    for key, per_block in tally.items():
        winners = [h for h, iss in per_block.items() if len(iss) >= quorum]
        if len(winners) > 1:
            bad.append(key)
    return bad


def equivocations(attestations) -> list:
    """Per-issuer audit: pairs sharing (root, slot) with different blocks."""
    seen: dict = {}
    out = []
    for a in attestations:
        k = (a.issuer, a.root.hash, a.slot)
        prev = seen.setdefault(k, a)
        if prev.block.hash != a.block.hash:
            out.append((prev, a))
    return out
