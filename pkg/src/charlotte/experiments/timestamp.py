"""How fast blocks accrue timestamps from distinct Ferns.

One client requests a stamp per block, rotating through the Ferns at a fixed
request interval.  Each Fern batches every ``batch`` client requests and has
its peers stamp the batch.  After the last request every Fern flushes once.
"""
from __future__ import annotations

import asyncio

from ..core import Opaque, Pattern, SigningKey, TimestampBatch
from ..fern import EntanglementConfig, TimestampFern, coverage_all
from ..metrics import Metrics
from ..transport import Kind
from .base import Cluster, as_list, summary


def run_accrual(ferns: int, batch: int, requests: int, interval_ms: float, seed: int,
                backend: str = "sim", jitter: bool = True):
    """Returns (per-block sorted accrual delays in ms, final-coverage fraction)."""
    cl = Cluster(backend, seed, jitter=jitter)

    async def main():
        nodes = [await cl.node("ts%d" % i) for i in range(ferns)]
        peers = [nd.address for nd in nodes]
        fs = [nd.add(TimestampFern(SigningKey.derive(seed, "ts%d" % i), EntanglementConfig(batch, peers)))
              for i, nd in enumerate(nodes)]
        ep = await cl.endpoint("client")
        sent = {}
        tasks = []
        for i in range(requests):
            blk = Opaque(b"ts-block:%d:%d" % (seed, i))
            sent[blk.hash] = cl.now_ms()
            body = Pattern(TimestampBatch, subjects=[blk.ref()]).encode()
            tasks.append(asyncio.ensure_future(ep.request(peers[i % ferns], Kind.REQ_INTEGRITY, body)))
            await asyncio.sleep(interval_ms / 1000.0)
        await asyncio.gather(*tasks)
        await asyncio.sleep(1.0)
        for f in fs:
            f.flush()
        await asyncio.sleep(2.0)
        blocks = {}
        for f in fs:
            for b in f.node.store.all():
                blocks[b.hash] = b
        return sent, coverage_all(blocks.values())

    sent, cov = cl.run(main)
    out, full = [], 0
    for h, t0 in sent.items():
        times = sorted(cov.get(h, {}).values())
        out.append([t - t0 for t in times])
        full += len(times) == ferns
    return out, full / len(sent)


def accrual(p, seed, backend) -> Metrics:
    m = Metrics("timestamp-accrual")
    m.note(batch_size=p["batch"], requests=p["requests"], request_interval_ms=float(p["interval_ms"]),
           scale_requests="%d/100000" % p["requests"])
    for n in as_list(p["ferns"]):
        delays, full = run_accrual(n, p["batch"], p["requests"], p["interval_ms"], seed, backend, p["jitter"])
        m.add("coverage", ferns=n, full_fraction=float(full))
        for x in range(1, n + 1):
            xs = [d[x - 1] for d in delays if len(d) >= x]
            m.add("accrual", ferns=n, stamps=x, **summary(xs))
    return m


DEFAULTS = {"ferns": [4, 8, 12, 16], "batch": 10, "requests": 10_000, "interval_ms": 10.0, "jitter": True}
