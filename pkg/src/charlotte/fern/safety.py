"""Exhaustive schedule search for agreement-chain safety.

Two clients race blocks ``a`` and ``b`` for slot 1 of one chain at every fern.
A schedule picks which ``f`` ferns equivocate and, for each honest fern,
which request arrives first (by giving one client a slower link).  Every
combination is run on the simulated network.
"""
from __future__ import annotations

import asyncio
from dataclasses import dataclass, field
from itertools import combinations, product

from ..core import ChainSlot, Opaque, Pattern, SigningKey
from ..node import sim_node
from ..transport import Kind, SimNetwork, run_sim
from .agreement import AgreementFern, conflicting_quorums, equivocations, quorum_size


@dataclass
class SafetyReport:
    f: int
    runs: int = 0
    violations: list = field(default_factory=list)
    honest_equivocations: int = 0
    quorums_reached: int = 0  # runs in which some block got a quorum

    @property
    def ok(self) -> bool:
        return not self.violations and not self.honest_equivocations


def run_schedule(f: int, byzantine, a_first, seed: int = 0):
    """One run; ``a_first[i]`` says whether honest fern i sees ``a`` first.
    Returns every attestation the two clients collected, plus the ferns."""
    n = 3 * f + 1
    net = SimNetwork(latency_ms=100, seed=seed)
    keys = [SigningKey.derive(seed, "agreement-fern-%d" % i) for i in range(n)]
    nodes, ferns = [], []
    for i in range(n):
        nd = sim_node(net, "fern%d" % i)
        ferns.append(nd.add(AgreementFern(keys[i], equivocate=i in byzantine)))
        nodes.append(nd)
    root = Opaque(b"root")
    blocks = {"a": Opaque(b"block-a"), "b": Opaque(b"block-b")}
    honest = [i for i in range(n) if i not in byzantine]
    for i, first in zip(honest, a_first):
        net.set_latency("client-a", "fern%d" % i, 100 if first else 150)
        net.set_latency("client-b", "fern%d" % i, 150 if first else 100)
    got = []

    async def client(name):
        ep = net.endpoint("client-" + name)
        blk = blocks[name]
        body = Pattern(ChainSlot, block=blk.ref(), root=root.ref(), slot=1, parent=root.ref()).encode()
        results = await asyncio.gather(*(ep.request(nd.address, Kind.REQ_INTEGRITY, body)
                                         for nd in nodes))
        for r in results:
            if r.ok:
                got.extend(r.blocks)

    async def main():
        await asyncio.gather(client("a"), client("b"))

    run_sim(main())
    return got, ferns


def check_agreement_safety(f: int) -> SafetyReport:
    n = 3 * f + 1
    q = quorum_size(f)
    rep = SafetyReport(f)
    for byz in combinations(range(n), f):
        for order in product((True, False), repeat=n - f):
            got, ferns = run_schedule(f, set(byz), order)
            rep.runs += 1
            bad = conflicting_quorums(got, q)
            if bad:
                rep.violations.append((byz, order, bad))
            for i, fern in enumerate(ferns):
                if i not in byz:
                    rep.honest_equivocations += len(equivocations(fern.issued))
            tally: dict = {}
            for a in got:
                tally.setdefault(a.block.hash, set()).add(a.issuer)
            rep.quorums_reached += any(len(v) >= q for v in tally.values())
    return rep
