"""A server: one endpoint, one block store, and the services it runs.

Every received block is stored (insert-only), then offered to each service.
Requests are routed by kind; integrity requests by the block variant of the
pattern they carry.
"""
from __future__ import annotations

import asyncio
import logging

from .core import Pattern, SigningKey
from .transport import Handler, Kind, Result, TransportError
from .store import BlockStore

log = logging.getLogger(__name__)


class Service:
    request_kinds: tuple = ()
    integrity_types: tuple = ()
    node: "Node" = None

    def attach(self, node: "Node"):
        self.node = node

    def on_block(self, block, sender, new: bool) -> None:
        """Raise ValueError to reject (reported to the sender by stream offset)."""

    async def on_request(self, kind: Kind, body: bytes, sender) -> Result:
        return Result(error="unsupported")

    async def on_integrity(self, request: Pattern, sender) -> Result:
        return Result(error="unsupported")


class Node(Handler):
    def __init__(self, name: str, key: SigningKey | None = None, journal: str | None = None):
        self.name = name
        self.key = key
        self.store = BlockStore(journal)
        self.services: list = []
        self.endpoint = None
        self._kinds: dict = {}
        self._integrity: dict = {}
        self._tasks: set = set()

    def __repr__(self):
        return "Node(%s)" % self.name

    @property
    def address(self):
        return self.endpoint.address

    def bind(self, endpoint) -> "Node":
        endpoint.handler = self
        self.endpoint = endpoint
        return self

    def add(self, svc: Service) -> Service:
        svc.attach(self)
        self.services.append(svc)
        for k in svc.request_kinds:
            self._kinds[k] = svc
        for cls in svc.integrity_types:
            self._integrity[cls] = svc
        return svc

    def service(self, cls):
        for s in self.services:
            if isinstance(s, cls):
                return s
        return None

    def clock_ms(self) -> int:
        return self.endpoint.clock_ms()

    # -- inbound -------------------------------------------------------------

    def handle_block(self, block, sender):
        new = self.store.add(block)
        for s in self.services:
            s.on_block(block, sender, new)

    def accept_local(self, block) -> bool:
        """Store a block produced here, as if it had arrived."""
        new = self.store.add(block)
        for s in self.services:
            s.on_block(block, None, new)
        return new

    async def handle_request(self, kind, body, sender) -> Result:
        if kind == Kind.REQ_INTEGRITY:
            pat = Pattern.decode(body)
            svc = self._integrity.get(pat.cls)
            if svc is None:
                return Result(error="no integrity service for %s" % pat.cls.__name__)
            return await svc.on_integrity(pat, sender)
        svc = self._kinds.get(kind)
        if svc is None:
            return Result(error="request kind %s not served by %s" % (kind.name, self.name))
        return await svc.on_request(kind, body, sender)

    # -- outbound helpers ----------------------------------------------------

    def spawn(self, coro):
        t = asyncio.get_running_loop().create_task(coro)
        self._tasks.add(t)
        t.add_done_callback(self._done)
        return t

    def _done(self, t):
        self._tasks.discard(t)
        if not t.cancelled() and t.exception() is not None:
            e = t.exception()
            if isinstance(e, TransportError):
                log.debug("%s: background send failed: %s", self.name, e)
            else:
                log.error("%s: background task failed: %r", self.name, e)

    def post(self, dest, blocks):
        """Fire-and-forget send (scheduled in call order)."""
        return self.spawn(self.endpoint.post_blocks(dest, list(blocks)))

    def broadcast(self, dests, blocks):
        blocks = list(blocks)
        for d in dests:
            if d != self.address:
                self.post(d, blocks)


def sim_node(net, name: str, key: SigningKey | None = None, **kw) -> Node:
    """A node attached to a simulated network under label ``name``."""
    return Node(name, key, **kw).bind(net.endpoint(name))
