"""The availability server: store, pledge, relay, answer queries."""
from __future__ import annotations

from ..core import Hash, SigningKey, StoreForever
from ..node import Service
from ..transport import AvailabilityPolicy, Kind, Result, decode_query

DEFAULT_QUERY_TIMEOUT = 30.0


def referenced_attestations(block) -> list:
    """Hashes of attestations bundled in the references a block contains."""
    out = []
    for r in block.embedded_refs():
        out.extend(r.availability)
        out.extend(i.hash for i in r.integrity)
    return out


class Wilbur(Service):
    request_kinds = (Kind.REQ_AVAIL, Kind.WILBUR_QUERY)

    def __init__(self, key: SigningKey, peers=(), query_timeout: float = DEFAULT_QUERY_TIMEOUT):
        self.key = key
        self.peers = list(peers)
        self.query_timeout = query_timeout
        self.issued: list = []

    def on_block(self, block, sender, new):
        if new:
            for p in self.peers:
                if p != sender:
                    self.node.post(p, [block])

    async def on_request(self, kind, body, sender) -> Result:
        if kind == Kind.REQ_AVAIL:
            return await self.attest(AvailabilityPolicy.decode(body))
        target, wait_ms = decode_query(body)
        if isinstance(target, Hash):
            t = self.query_timeout if wait_ms is None else wait_ms / 1000.0
            b = await self.node.store.wait_for(target, t)
            if b is None:
                return Result(error="timed out waiting for %s" % target.hex())
            return Result(blocks=(b,))
        return Result(blocks=tuple(self.node.store.query(target)))

    async def attest(self, policy: AvailabilityPolicy) -> Result:
        store = self.node.store
        wait = policy.wait_ms / 1000.0
        loop_time = self.node.endpoint.clock_ms
        t0 = loop_time()
        subjects = [r.hash for r in policy.subjects]
        missing = await store.wait_all(subjects, wait)
        if missing:
            return Result(error="missing blocks: " + ", ".join(h.hex() for h in missing))
        extra = []
        if policy.cover_referenced_attestations:
            for r in policy.subjects:
                extra.extend(r.availability)
                extra.extend(i.hash for i in r.integrity)
                extra.extend(referenced_attestations(store.fetch(r.hash)))
            left = max(0.0, wait - (loop_time() - t0) / 1000.0)
            missing = await store.wait_all(sorted(set(extra)), left)
            if missing:
                return Result(error="missing referenced attestations: "
                              + ", ".join(h.hex() for h in missing))
        subject = policy.subjects[0].bare()
        covered = [h for h in subjects[1:] + extra if h != subject.hash]
        att = StoreForever.signed(self.key, subject=subject, covered=covered)
        self.node.accept_local(att)
        self.issued.append(att)
        return Result(refs=(att.ref(),), blocks=(att,))

