"""Cluster plumbing shared by the experiments: the same driver code runs on
the virtual-time simulator or on localhost sockets."""
from __future__ import annotations

import asyncio
import statistics

from ..metrics import percentile
from ..node import Node, sim_node
from ..transport import SimNetwork, TcpEndpoint, run_sim

LATENCY_MS = 100.0


class Cluster:
    def __init__(self, backend: str = "sim", seed: int = 0, latency_ms: float = LATENCY_MS,
                 jitter: bool = True):
        if backend not in ("sim", "tcp"):
            raise ValueError("backend must be sim or tcp")
        self.backend = backend
        self.net = SimNetwork(latency_ms, seed, jitter) if backend == "sim" else None
        self._tcp: list = []

    async def node(self, name: str, key=None) -> Node:
        if self.net is not None:
            return sim_node(self.net, name, key)
        return Node(name, key).bind(await self.endpoint(name))

    async def endpoint(self, label: str):
        if self.net is not None:
            return self.net.endpoint(label)
        ep = await TcpEndpoint("127.0.0.1", 0).start()
        self._tcp.append(ep)
        return ep

    @staticmethod
    def now_ms() -> float:
        return asyncio.get_running_loop().time() * 1000.0

    async def close(self):
        for ep in self._tcp:
            await ep.close()

    def run(self, make_coro):
        async def wrapped():
            try:
                return await make_coro()
            finally:
                await self.close()
        if self.net is not None:
            return run_sim(wrapped())
        return asyncio.run(wrapped())


def summary(xs) -> dict:
    """Latency summary fields, in ms."""
    if not xs:
        return {"n": 0}
    return {
        "n": len(xs),
        "mean_ms": float(statistics.fmean(xs)),
        "p1_ms": float(percentile(xs, 1)),
        "p25_ms": float(percentile(xs, 25)),
        "p50_ms": float(percentile(xs, 50)),
        "p75_ms": float(percentile(xs, 75)),
        "p99_ms": float(percentile(xs, 99)),
    }


def as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]
