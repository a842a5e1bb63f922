"""Hetcons chains under four workloads: independent chains in parallel,
shared (meet) blocks over several chains, many clients contending for one
chain, and a mix of single-chain and two-chain blocks."""
from __future__ import annotations

import asyncio
import random
import re

from ..core import HetconsProposal, Opaque, Pattern, QuorumConfig, SigningKey
from ..fern import HetconsFern, make_chain, proposer_of
from ..metrics import Metrics
from ..transport import Kind, TransportError
from .base import Cluster, as_list, summary

REFUSED = re.compile(r"slot (\d+) of chain ([0-9a-f]+).*?highest decided slot (\d+)")


async def deploy(cl: Cluster, chains: int, per_chain: int, seed: int, **kw):
    """Disjoint fern groups, one chain each.  Returns (chains, directory)
    where chains is a list of (root, config)."""
    keys = [SigningKey.derive(seed, "hetcons-%d" % i) for i in range(chains * per_chain)]
    nodes = [await cl.node("h%d" % i, k) for i, k in enumerate(keys)]
    directory = {k.id: nd.address for k, nd in zip(keys, nodes)}
    for k, nd in zip(keys, nodes):
        nd.add(HetconsFern(k, directory, seed=seed, **kw))
    out = []
    for c in range(chains):
        group = keys[c * per_chain:(c + 1) * per_chain]
        cfg = QuorumConfig.threshold([k.id for k in group], (per_chain - 1) // 3)
        root = make_chain("chain-%d-%d" % (seed, c), cfg)
        for nd in nodes:
            nd.accept_local(cfg)
            nd.accept_local(root)
        out.append((root, cfg))
    return out, directory, nodes


class ChainClient:
    """Appends blocks to chosen chains, learning each chain's next free slot
    from refusals."""

    def __init__(self, ep, chains, directory, timeout: float = 60.0):
        self.ep = ep
        self.chains = chains
        self.cfg = {r.hash: c for r, c in chains}
        self.directory = directory
        self.next = {r.hash: 1 for r, _ in chains}
        self.by_short = {r.hash.short(): r.hash for r, _ in chains}
        self.timeout = timeout
        self.refusals = 0

    async def append(self, blk, which, tries: int | None = None):
        """Commit ``blk`` to the chains at indices ``which``; returns the
        slot taken on each chain (root hash -> slot), or None once ``tries``
        refusals have been spent."""
        roots = [self.chains[i][0] for i in which]
        lead = min(roots, key=lambda r: r.hash.digest)
        dest = self.directory[proposer_of(self.cfg[lead.hash])]
        while True:
            slots = {r.hash: self.next[r.hash] for r in roots}
            body = Pattern(HetconsProposal, chains=[(r.ref(), slots[r.hash]) for r in roots],
                           block=blk.ref()).encode()
            try:
                res = await self.ep.request(dest, Kind.REQ_INTEGRITY, body, timeout=self.timeout)
            except TransportError:
                continue
            if res.ok:
                for h, s in slots.items():
                    self.next[h] = s + 1
                return slots
            m = REFUSED.search(res.error or "")
            if m and m.group(2) in self.by_short:
                h = self.by_short[m.group(2)]
                self.next[h] = max(self.next[h], int(m.group(1)) + 1, int(m.group(3)) + 1)
                self.refusals += 1
                if tries is not None:
                    tries -= 1
                    if tries <= 0:
                        return None
            elif not (res.error or "").startswith("refused"):
                raise RuntimeError("hetcons request failed: %s" % res.error)


def _throughput(times, skip):
    """Commits per second over the commit times after the first ``skip``."""
    ts = sorted(times)[skip:]
    if len(ts) < 2 or ts[-1] == ts[0]:
        return 0.0
    return (len(ts) - 1) / ((ts[-1] - ts[0]) / 1000.0)


def parallel(p, seed, backend) -> Metrics:
    m = Metrics("hetcons-parallel")
    m.note(scale_blocks="%d/2000" % p["blocks"], warmup=p["warmup"], ferns_per_chain=p["ferns"])
    base = None
    for n in as_list(p["chains"]):
        cl = Cluster(backend, seed, jitter=p["jitter"])

        async def main():
            chains, d, _ = await deploy(cl, n, p["ferns"], seed)
            clients = [ChainClient(await cl.endpoint("client%d" % i), chains, d) for i in range(n)]

            async def run(i, c):
                lat, times = [], []
                for b in range(p["blocks"]):
                    t0 = cl.now_ms()
                    await c.append(Opaque(b"par:%d:%d:%d" % (seed, i, b)), [i])
                    if b >= p["warmup"]:
                        lat.append(cl.now_ms() - t0)
                        times.append(cl.now_ms())
                return lat, times

            return await asyncio.gather(*(run(i, c) for i, c in enumerate(clients)))

        per = cl.run(main)
        agg = sum(_throughput(t, 0) for _, t in per)
        base = base if base is not None else agg / n
        for i, (lat, t) in enumerate(per):
            m.add("chain", chains=n, chain=i, throughput=_throughput(t, 0), **summary(lat))
        m.add("aggregate", chains=n, throughput=agg, linear=base * n, ratio=agg / (base * n),
              **summary([x for lat, _ in per for x in lat]))
    return m


def multichain(p, seed, backend) -> Metrics:
    m = Metrics("hetcons-multichain")
    m.note(scale_blocks="%d/1000" % p["blocks"], warmup=p["warmup"], ferns_per_chain=p["ferns"])
    for n in as_list(p["chains"]):
        cl = Cluster(backend, seed, jitter=p["jitter"])

        async def main():
            chains, d, _ = await deploy(cl, n, p["ferns"], seed)
            c = ChainClient(await cl.endpoint("client"), chains, d)
            lat = []
            for b in range(p["blocks"]):
                t0 = cl.now_ms()
                await c.append(Opaque(b"multi:%d:%d" % (seed, b)), list(range(n)))
                if b >= p["warmup"]:
                    lat.append(cl.now_ms() - t0)
            return lat

        lat = cl.run(main)
        m.add("meet", chains=n, **summary(lat))
    return m


def contention(p, seed, backend) -> Metrics:
    m = Metrics("hetcons-contention")
    lo, hi = p["window"]
    m.note(scale_slots="%d/2000" % p["slots"], window="%d-%d" % (lo, hi), ferns=p["ferns"])
    for n in as_list(p["clients"]):
        cl = Cluster(backend, seed, jitter=p["jitter"])

        async def main():
            chains, d, _ = await deploy(cl, 1, p["ferns"], seed)
            root = chains[0][0].hash
            decided = {}
            clients = [ChainClient(await cl.endpoint("client%d" % i), chains, d) for i in range(n)]

            async def run(i, c):
                b = 0
                while c.next[root] <= p["slots"] and len(decided) < p["slots"]:
                    got = await c.append(Opaque(b"cont:%d:%d:%d" % (seed, i, b)), [0])
                    decided[got[root]] = cl.now_ms()
                    b += 1
                    # everyone learns the tip only through refusals
            await asyncio.gather(*(run(i, c) for i, c in enumerate(clients)))
            return decided, sum(c.refusals for c in clients)

        decided, refusals = cl.run(main)
        span = (decided[hi] - decided[lo]) / 1000.0
        m.add("contention", clients=n, throughput=(hi - lo) / span if span else 0.0,
              slots=len(decided), refusals=refusals)
    return m


def mixed(p, seed, backend) -> Metrics:
    m = Metrics("hetcons-mixed")
    m.note(blocks_per_client=p["blocks"], meet_probability=float(p["meet_p"]),
           warmup_fraction=float(p["warmup_fraction"]), ferns_per_chain=p["ferns"])
    for nchains in as_list(p["chains"]):
        for n in as_list(p["clients"]):
            cl = Cluster(backend, seed, jitter=p["jitter"])

            async def main():
                chains, d, _ = await deploy(cl, nchains, p["ferns"], seed)
                clients = [ChainClient(await cl.endpoint("client%d" % i), chains, d)
                           for i in range(n)]
                times, meets = [], [0]

                async def run(i, c):
                    rng = random.Random("mixed:%d:%d:%d:%d" % (seed, nchains, n, i))
                    for b in range(p["blocks"]):
                        if rng.random() < p["meet_p"]:
                            which = sorted(rng.sample(range(nchains), 2))
                            meets[0] += 1
                        else:
                            which = [rng.randrange(nchains)]
                        await c.append(Opaque(b"mix:%d:%d:%d" % (seed, i, b)), which)
                        times.append(cl.now_ms())

                await asyncio.gather(*(run(i, c) for i, c in enumerate(clients)))
                return times, meets[0]

            times, meets = cl.run(main)
            skip = int(len(times) * p["warmup_fraction"])
            m.add("mixed", chains=nchains, clients=n, throughput=_throughput(times, skip),
                  commits=len(times), meets=meets)
    return m


def meet_atomicity(meets: int = 1000, meet_clients: int = 4, seed: int = 0,
                   backend: str = "sim", jitter: bool = True, think_ms: float = 500.0) -> dict:
    """Two chains; ``meet_clients`` clients commit shared blocks to both while
    one client per chain keeps appending single-chain blocks.  Afterwards
    every shared block must sit in both chains' ledgers or in neither."""
    cl = Cluster(backend, seed, jitter=jitter)

    async def main():
        chains, d, nodes = await deploy(cl, 2, 4, seed)
        ferns = [nd.services[0] for nd in nodes]
        groups = [ferns[:4], ferns[4:]]
        mc = [ChainClient(await cl.endpoint("meet%d" % i), chains, d) for i in range(meet_clients)]
        sc = [ChainClient(await cl.endpoint("single%d" % i), chains, d) for i in range(2)]
        done = [False]
        shared = []

        async def meet_run(i, c):
            for b in range(i, meets, meet_clients):
                blk = Opaque(b"meet:%d:%d" % (seed, b))
                shared.append(blk.hash)
                # odd meets give up after one refusal, so some never commit
                await c.append(blk, [0, 1], tries=1 if b % 2 else None)

        async def single_run(i, c):
            rng = random.Random("single:%d:%d" % (seed, i))
            b = 0
            while not done[0]:
                await asyncio.sleep(rng.expovariate(1000.0 / think_ms))
                await c.append(Opaque(b"single:%d:%d:%d" % (seed, i, b)), [i])
                b += 1

        singles = [asyncio.ensure_future(single_run(i, c)) for i, c in enumerate(sc)]
        await asyncio.gather(*(meet_run(i, c) for i, c in enumerate(mc)))
        done[0] = True
        await asyncio.gather(*singles)
        await asyncio.sleep(5.0)

        # per chain: block hash -> slots holding it, as seen by every member
        views = []
        for (root, _), group in zip(chains, groups):
            per_fern = []
            for f in group:
                held = {}
                for (r, slot), ph in f.core.decided.items():
                    if r != root.hash:
                        continue
                    P = f.node.store.get(ph)
                    held.setdefault(P.block.hash, set()).add(slot)
                per_fern.append(held)
            views.append(per_fern)
        violations, both, neither, disagree = [], 0, 0, 0
        for h in shared:
            present = []
            for per_fern in views:
                seen = {frozenset(v.get(h, ())) for v in per_fern}
                if len(seen) > 1:
                    disagree += 1
                present.append(any(h in v for v in per_fern))
            if present[0] != present[1]:
                violations.append(h.hex())
            elif present[0]:
                both += 1
            else:
                neither += 1
        singles_done = sum(c.next[chains[i][0].hash] - 1 for i, c in enumerate(sc))
        return {"meets": len(shared), "both": both, "neither": neither, "violations": violations,
                "member_disagreements": disagree, "single_commits": singles_done}

    return cl.run(main)


PARALLEL_DEFAULTS = {"chains": [1, 2, 3, 4], "ferns": 4, "blocks": 200, "warmup": 100, "jitter": True}
MULTICHAIN_DEFAULTS = {"chains": [2, 3, 4], "ferns": 4, "blocks": 100, "warmup": 50, "jitter": True}
CONTENTION_DEFAULTS = {"clients": [2, 4, 8, 16], "ferns": 4, "slots": 200, "window": [50, 150], "jitter": True}
MIXED_DEFAULTS = {"chains": [2, 7], "clients": [2, 3, 4, 5], "ferns": 4, "blocks": 40,
                  "meet_p": 0.1, "warmup_fraction": 0.2, "jitter": True}
