"""Agreement-chain latency and client bandwidth, with and without Wilbur
servers.  A single client appends successive blocks to one chain; the first
``warmup`` blocks are excluded from the measurements."""
from __future__ import annotations

import random

from ..client import AgreementTarget, Client
from ..core import SigningKey
from ..fern import AgreementConfig, AgreementFern, Requirement
from ..metrics import Metrics
from ..wilbur import Wilbur
from .base import Cluster, as_list, summary


def run_chain(f: int, with_wilbur: bool, blocks: int, warmup: int, block_bytes: int,
              seed: int, backend: str = "sim", jitter: bool = True) -> dict:
    cl = Cluster(backend, seed, jitter=jitter)
    rng = random.Random("agreement:%d:%d:%s" % (seed, f, with_wilbur))

    async def main():
        fkeys = [SigningKey.derive(seed, "agreement-fern-%d" % i) for i in range(3 * f + 1)]
        wkeys = [SigningKey.derive(seed, "wilbur-%d" % i) for i in range(f + 1)] if with_wilbur else []
        cfg = AgreementConfig(
            parent_integrity=Requirement(2 * f + 1, {k.id for k in fkeys}),
            block_availability=Requirement(f + 1 if with_wilbur else 0, {k.id for k in wkeys}))
        ferns = []
        for i, k in enumerate(fkeys):
            nd = await cl.node("fern%d" % i, k)
            nd.add(AgreementFern(k, cfg, evidence_wait=1.0))
            ferns.append(nd.address)
        wilburs = []
        for i, k in enumerate(wkeys):
            nd = await cl.node("wilbur%d" % i, k)
            nd.add(Wilbur(k))
            wilburs.append(nd.address)
        ep = await cl.endpoint("client")
        c = Client(ep, timeout=30.0)
        root = c.mint(b"agreement-root:%d" % seed)
        parent = root.ref()
        lat, bytes_at = [], None
        for slot in range(1, blocks + 1):
            if slot == warmup + 1:
                bytes_at = ep.bytes_sent
            t0 = cl.now_ms()
            blk = c.mint(rng.randbytes(block_bytes), [parent])
            if with_wilbur:
                atts = await c.replicate(blk, wilburs, f + 1)
            else:
                atts = []
                for fa in ferns:
                    await c.send(fa, blk)
            parent = await c.commit(blk, atts, AgreementTarget(ferns, f, root.ref(), slot, parent))
            if slot > warmup:
                lat.append(cl.now_ms() - t0)
        return lat, ep.bytes_sent - (bytes_at or 0)

    lat, sent = cl.run(main)
    return {"latencies": lat, "client_bytes": sent}


def _modes(p):
    w = p["wilbur"]
    modes = {"both": (False, True), "with": (True,), "without": (False,)}
    if w not in modes:
        raise ValueError("wilbur must be one of %s, got %r" % (", ".join(modes), w))
    return modes[w]


def latency(p, seed, backend) -> Metrics:
    m = Metrics("agreement-latency")
    m.note(scale_blocks="%d/1000" % p["blocks"], scale_warmup="%d/500" % p["warmup"],
           link_latency_ms=100)
    for f in as_list(p["f"]):
        for w in _modes(p):
            r = run_chain(f, w, p["blocks"], p["warmup"], p["block_bytes"], seed, backend, p["jitter"])
            m.add("summary", f=f, wilbur=w, client_bytes=r["client_bytes"], **summary(r["latencies"]))
            if p["per_block"]:
                for i, x in enumerate(r["latencies"]):
                    m.add("block", f=f, wilbur=w, i=i + p["warmup"] + 1, latency_ms=float(x))
    return m


def bandwidth(p, seed, backend) -> Metrics:
    m = Metrics("agreement-bandwidth")
    m.note(scale_blocks="%d/1000" % p["blocks"], scale_warmup="%d/500" % p["warmup"],
           block_bytes=p["block_bytes"])
    for f in as_list(p["f"]):
        with_w = run_chain(f, True, p["blocks"], p["warmup"], p["block_bytes"], seed, backend, p["jitter"])
        without = run_chain(f, False, p["blocks"], p["warmup"], p["block_bytes"], seed, backend, p["jitter"])
        ratio = with_w["client_bytes"] / without["client_bytes"]
        m.add("bandwidth", f=f, with_wilbur_bytes=with_w["client_bytes"],
              without_wilbur_bytes=without["client_bytes"], ratio=ratio,
              ideal_ratio=(f + 1) / (3 * f + 1),
              with_p50_ms=float(summary(with_w["latencies"])["p50_ms"]),
              without_p50_ms=float(summary(without["latencies"])["p50_ms"]))
    return m


LATENCY_DEFAULTS = {"f": [1], "blocks": 200, "warmup": 100, "block_bytes": 10, "wilbur": "both",
                    "per_block": False, "jitter": True}
BANDWIDTH_DEFAULTS = {"f": [1, 2, 3], "blocks": 200, "warmup": 100, "block_bytes": 1_000_000, "jitter": True}
