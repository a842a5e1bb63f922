"""Mean attestation delay of a PoW chain against difficulty and miner count.

A single client submits blocks one after another to every miner and takes
the first attestation back (k = 1).  The delay model is a + c * 2**d / n.
"""
from __future__ import annotations

import asyncio
import statistics

from ..core import NakamotoPoW, Opaque, Pattern
from ..fern import NakamotoFern, PowChainConfig
from ..metrics import Metrics
from ..transport import Kind
from .base import Cluster, as_list


def run_pow(bits: int, miners: int, blocks: int, hash_rate: float, seed: int,
            backend: str = "sim", jitter: bool = True) -> list:
    cl = Cluster(backend, seed, jitter=jitter)

    async def main():
        root = Opaque(b"pow-root:%d" % seed)
        cfg = PowChainConfig(root.ref(), difficulty_bits=bits, k=1, hash_rate=hash_rate)
        nodes = [await cl.node("miner%d" % i) for i in range(miners)]
        peers = [nd.address for nd in nodes]
        for i, nd in enumerate(nodes):
            nd.add(NakamotoFern(cfg, peers, index=i))
        ep = await cl.endpoint("client")
        delays = []
        for b in range(blocks):
            blk = Opaque(b"pow-block:%d:%d:%d:%d" % (seed, bits, miners, b))
            body = Pattern(NakamotoPoW, block=blk.ref()).encode()
            t0 = cl.now_ms()
            tasks = [asyncio.ensure_future(ep.request(a, Kind.REQ_INTEGRITY, body, timeout=3600))
                     for a in peers]
            for fut in asyncio.as_completed(tasks):
                if (await fut).ok:
                    break
            delays.append(cl.now_ms() - t0)
            for t in tasks:
                t.cancel()
        return delays

    return cl.run(main)


def fit(points):
    """Least squares y = a + c*x; returns (a, c, r2)."""
    xs, ys = [p[0] for p in points], [p[1] for p in points]
    c, a = statistics.linear_regression(xs, ys)
    my = statistics.fmean(ys)
    ss_tot = sum((y - my) ** 2 for y in ys)
    ss_res = sum((y - (a + c * x)) ** 2 for x, y in zip(xs, ys))
    return a, c, 1.0 - ss_res / ss_tot if ss_tot else 1.0


def scaling(p, seed, backend) -> Metrics:
    m = Metrics("nakamoto-scaling")
    m.note(hash_rate_per_miner=float(p["hash_rate"]), blocks_per_point=p["blocks"],
           scale_blocks="%d/100" % p["blocks"], k=1)
    points = []
    for bits in as_list(p["bits"]):
        for n in as_list(p["miners"]):
            d = run_pow(bits, n, p["blocks"], p["hash_rate"], seed, backend, p["jitter"])
            mean = statistics.fmean(d)
            se = statistics.stdev(d) / len(d) ** 0.5 if len(d) > 1 else 0.0
            x = 2 ** bits / n
            points.append((x, mean))
            m.add("point", bits=bits, miners=n, x=float(x), mean_ms=float(mean), se_ms=float(se),
                  min_ms=float(min(d)), max_ms=float(max(d)))
    if len(points) >= 2:
        a, c, r2 = fit(points)
        m.add("fit", a_ms=float(a), c_ms_per_hash=float(c), r2=float(r2),
              implied_rate=float(1000.0 / c) if c else 0.0)
    return m


DEFAULTS = {"bits": list(range(12, 19)), "miners": [1, 2, 4], "blocks": 20, "hash_rate": 16384.0, "jitter": True}
