"""In-process network on the virtual-time loop.

Links are FIFO with a fixed one-way latency (optionally jittered +-10% from
the seed).  Envelopes travel as objects; byte counters use the exact encoded
envelope size.  Decoded blocks are interned by hash so that many simulated
nodes holding the same large block share one copy.
"""
from __future__ import annotations

import asyncio
import random
from collections import defaultdict, deque

from ..core import Block, Hash, decode_block
from .address import NodeAddress
from .endpoint import Endpoint, Handler, TransportError
from .frames import HEADER, Envelope


class SimNetwork:
    def __init__(self, latency_ms: float = 100.0, seed: int = 0, jitter: bool = False):
        if latency_ms < 0:
            raise ValueError("latency must be >= 0")
        self.latency_ms = float(latency_ms)
        self.seed = seed
        self.jitter = jitter
        self._rng = random.Random("simnet:%s" % seed)
        self.link_latency: dict = {}  # (src, dst) -> ms override
        self.nodes: dict = {}  # label -> SimEndpoint
        self.down: set = set()
        self._queues: dict = defaultdict(deque)  # (src, dst) -> deque[(arrival, env, reply_to)]
        self._last_arrival: dict = {}
        self._interned: dict = {}
        self.bytes_sent = defaultdict(int)
        self.bytes_received = defaultdict(int)
        self.frames_sent = defaultdict(int)
        self.trace = None  # optional list collecting (time, src, dst, kind, corr)

    def endpoint(self, label: str, handler: Handler | None = None, **kw) -> "SimEndpoint":
        if label in self.nodes:
            raise ValueError("duplicate sim node %r" % label)
        ep = SimEndpoint(self, label, handler, **kw)
        self.nodes[label] = ep
        return ep

    def set_latency(self, a: str, b: str, ms: float, both: bool = True):
        self.link_latency[(a, b)] = float(ms)
        if both:
            self.link_latency[(b, a)] = float(ms)

    def crash(self, label: str):
        self.down.add(label)

    def recover(self, label: str):
        self.down.discard(label)

    def now_ms(self) -> float:
        return asyncio.get_running_loop().time() * 1000.0

    # -- delivery ------------------------------------------------------------

    def transmit(self, src: str, dst: str, env: Envelope):
        if dst not in self.nodes:
            raise TransportError("unreachable: no node sim:%s" % dst)
        if src in self.down:
            return
        loop = asyncio.get_running_loop()
        size = HEADER.size + len(env.payload)
        self.bytes_sent[src] += size
        self.frames_sent[src] += 1
        lat = self.link_latency.get((src, dst), self.latency_ms)
        if self.jitter:
            lat *= 1.0 + self._rng.uniform(-0.1, 0.1)
        now = loop.time()
        key = (src, dst)
        # FIFO: never overtake an earlier frame on the same link
        arrival = max(now + lat / 1000.0, self._last_arrival.get(key, 0.0))
        self._last_arrival[key] = arrival
        self._queues[key].append((env, size))
        loop.call_at(arrival, self._deliver_head, key)

    def _deliver_head(self, key):
        # pops the head rather than a specific frame, which keeps per-link
        # order even when several arrivals share one timestamp
        env, size = self._queues[key].popleft()
        src, dst = key
        if dst in self.down:
            return
        self.bytes_received[dst] += size
        if self.trace is not None:
            self.trace.append((round(self.now_ms(), 6), src, dst, int(env.kind), env.correlation))
        node = self.nodes[dst]
        node._receive(NodeAddress.sim(src), env, lambda e, s=src, d=dst: self.transmit(d, s, e))

    def intern(self, payload: bytes) -> Block:
        h = Hash.of(payload)
        b = self._interned.get(h)
        if b is None:
            b = decode_block(payload)
            self._interned[h] = b
        return b


class SimEndpoint(Endpoint):
    def __init__(self, net: SimNetwork, label: str, handler=None, **kw):
        super().__init__(NodeAddress.sim(label), handler, **kw)
        self.net = net
        self.label = label

    async def _send(self, dest, env: Envelope) -> None:
        if isinstance(dest, str):
            dest = NodeAddress.parse(dest) if ":" in dest else NodeAddress.sim(dest)
        if dest.backend != "sim":
            raise TransportError("sim endpoint cannot reach %s" % dest)
        self.net.transmit(self.label, dest.label, env)

    def clock_ms(self) -> int:
        return int(round(self.net.now_ms()))

    def _decode(self, payload: bytes) -> Block:
        return self.net.intern(payload)

    @property
    def bytes_sent(self) -> int:
        return self.net.bytes_sent[self.label]

    @property
    def bytes_received(self) -> int:
        return self.net.bytes_received[self.label]
