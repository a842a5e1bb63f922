"""Timestamping with batching and cross-Fern entanglement."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from ..core import SHA3_256, Hash, Pattern, SigningKey, TimestampBatch
from ..node import Service
from ..transport import Kind, Result


@dataclass
class EntanglementConfig:
    batch_size: int = 100
    peers: list = field(default_factory=list)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


class TimestampFern(Service):
    integrity_types = (TimestampBatch,)

    def __init__(self, key: SigningKey, config: EntanglementConfig | None = None):
        self.key = key
        self.config = config or EntanglementConfig()
        self.counter = 0  # client requests since the last batch
        self.pending: list = []  # refs stamped since the last batch
        self.last_time = 0
        self.issued: list = []
        self.batches: list = []
        self.peer_stamps: list = []  # attestations peers issued over our batches

    def _now(self) -> int:
        t = max(self.node.clock_ms(), self.last_time)
        self.last_time = t
        return t

    def stamp(self, refs) -> TimestampBatch:
        att = TimestampBatch.signed(self.key, time=self._now(), subjects=list(refs))
        self.node.accept_local(att)
        self.issued.append(att)
        self.pending.append(att.ref())
        return att

    async def on_integrity(self, req, sender) -> Result:
        req.require("subjects")
        att = self.stamp(req.get("subjects"))
        # stamps of peer batches join the next batch but do not advance the
        # counter; otherwise each batch would trigger more than one batch's
        # worth of peer requests and the exchange would never settle
        if not self._from_peer(req):
            self.counter += 1
            if self.counter >= self.config.batch_size:
                self.flush()
        return Result(refs=(att.ref(),), blocks=(att,))

    def _from_peer(self, req) -> bool:
        subs = req.get("subjects")
        if len(subs) != 1:
            return False
        b = self.node.store.get(subs[0].hash)
        return isinstance(b, TimestampBatch) and b.issuer != self.key.id

    def flush(self) -> TimestampBatch | None:
        """Issue a batch over everything stamped since the last one and
        submit it to every peer."""
        self.counter = 0
        if not self.pending:
            return None
        batch = TimestampBatch.signed(self.key, time=self._now(), subjects=self.pending)
        self.pending = []
        self.node.accept_local(batch)
        self.batches.append(batch)
        for p in self.config.peers:
            if p != self.node.address:
                self.node.spawn(self._submit(p, batch))
        return batch

    async def _submit(self, peer, batch):
        await self.node.endpoint.post_blocks(peer, [batch])
        res = await self.node.endpoint.request(
            peer, Kind.REQ_INTEGRITY, Pattern(TimestampBatch, subjects=[batch.ref()]).encode())
        if res.ok:
            for b in res.blocks:
                self.node.store.add(b)
            self.peer_stamps.extend(res.blocks)


# -- coverage ------------------------------------------------------------------

def ref_edges(block) -> list:
    """Hashes a block points at: embedded references and their bundles."""
    out = []
    for r in block.embedded_refs():
        out.append(r.hash)
        out.extend(r.availability)
        out.extend(i.hash for i in r.integrity)
    return out


def stamp_coverage(target, dag) -> dict:
    """issuer -> earliest time of any timestamp from which ``target`` is
    reachable along reference edges (``dag`` is a BlockStore or list)."""
    blocks = dag.all() if hasattr(dag, "all") else list(dag)
    back: dict = {}
    for b in blocks:
        for h in ref_edges(b):
            back.setdefault(h, []).append(b)
    out: dict = {}
    seen = {target}
    frontier = [target]
    while frontier:
        nxt = []
        for h in frontier:
            for b in back.get(h, ()):
                if b.hash in seen:
                    continue
                seen.add(b.hash)
                nxt.append(b.hash)
                if isinstance(b, TimestampBatch):
                    if b.issuer not in out or b.time < out[b.issuer]:
                        out[b.issuer] = b.time
        frontier = nxt
    return out


def coverage_all(blocks) -> dict:
    """stamp_coverage for every referenced hash at once, by propagating
    earliest-per-issuer maps from referrers to referees in topological order."""
    blocks = list(blocks)
    by_hash = {b.hash: b for b in blocks}
    edges = {b.hash: ref_edges(b) for b in blocks}
    indeg: dict = {}
    for h, outs in edges.items():
        for t in outs:
            indeg[t] = indeg.get(t, 0) + 1
    # referrers first: start from blocks nobody references
    order = []
    ready = [h.digest for h in by_hash if indeg.get(h, 0) == 0]
    heapq.heapify(ready)
    remaining = dict(indeg)
    while ready:
        d = heapq.heappop(ready)
        h = Hash(SHA3_256, d)
        order.append(h)
        for t in edges.get(h, ()):
            remaining[t] -= 1
            if remaining[t] == 0 and t in by_hash:
                heapq.heappush(ready, t.digest)
    cov: dict = {}
    for h in order:
        b = by_hash[h]
        mine = dict(cov.get(h, {}))
        if isinstance(b, TimestampBatch):
            if b.issuer not in mine or b.time < mine[b.issuer]:
                mine[b.issuer] = b.time
        for t in edges[h]:
            tgt = cov.setdefault(t, {})
            for iss, tm in mine.items():
                if iss not in tgt or tm < tgt[iss]:
                    tgt[iss] = tm
    return cov
