"""Backend-independent half of a node's messaging: correlation, streams,
request dispatch.  Backends supply ``_send`` (outbound envelope) and call
``_receive`` for every inbound envelope together with a reply function.
"""
from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass, field

from ..core import Block, decode_block
from ..core.wire import DecodeError
from .frames import (
    Envelope,
    FrameError,
    Kind,
    Result,
    StreamDone,
    StreamError,
    decode_response,
    encode_response,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0


class TransportError(Exception):
    """Destination unreachable or connection lost."""


class RequestTimeout(TransportError):
    pass


@dataclass
class StreamReport:
    delivered: int = 0
    errors: list = field(default_factory=list)  # [StreamError]

    @property
    def ok(self) -> bool:
        return not self.errors


class Handler:
    """What a node plugs into an endpoint."""

    def handle_block(self, block: Block, sender) -> None:
        """Raise ValueError to report the block back to the sender."""

    async def handle_request(self, kind: Kind, body: bytes, sender) -> Result:
        return Result(error="request kind %s not served here" % kind.name)


@dataclass
class _Inbound:
    offset: int = 0
    delivered: int = 0
    errors: int = 0


class Endpoint:
    def __init__(self, address, handler: Handler | None = None,
                 timeout: float = DEFAULT_TIMEOUT):
        self.address = address
        self.handler = handler or Handler()
        self.timeout = timeout
        self._corr = 0
        self._pending: dict = {}  # corr -> Future[Result]
        self._streams: dict = {}  # corr -> (report, Future[StreamReport])
        self._inbound: dict = {}  # (peer, corr) -> _Inbound
        self._tasks: set = set()

    # -- backend hooks -------------------------------------------------------

    async def _send(self, dest, env: Envelope) -> None:
        raise NotImplementedError

    def clock_ms(self) -> int:
        raise NotImplementedError

    def _decode(self, payload: bytes) -> Block:
        return decode_block(payload)

    # -- outbound ------------------------------------------------------------

    def _next_corr(self) -> int:
        self._corr += 1
        return self._corr

    async def post_blocks(self, dest, blocks) -> None:
        """Fire-and-forget delivery; the receiver reports nothing back."""
        for b in blocks:
            await self._send(dest, Envelope(Kind.SEND_BLOCKS, 0, _payload(b)))

    async def send_blocks(self, dest, blocks, timeout: float | None = None) -> StreamReport:
        """One stream: each item is a Block (or raw frame bytes).  Resolves when
        the receiver closes the stream; errors carry stream offsets."""
        corr = self._next_corr()
        fut = asyncio.get_running_loop().create_future()
        report = StreamReport()
        self._streams[corr] = (report, fut)
        try:
            for b in blocks:
                p = _payload(b)
                if not p:
                    raise ValueError("empty frames are reserved for end of stream")
                await self._send(dest, Envelope(Kind.SEND_BLOCKS, corr, p))
            await self._send(dest, Envelope(Kind.SEND_BLOCKS, corr, b""))
            return await self._wait(fut, timeout, "stream to %s" % (dest,))
        finally:
            self._streams.pop(corr, None)

    async def request(self, dest, kind: Kind, body: bytes,
                      timeout: float | None = None) -> Result:
        if kind not in (Kind.REQ_AVAIL, Kind.REQ_INTEGRITY, Kind.WILBUR_QUERY):
            raise ValueError("not a request kind: %r" % kind)
        corr = self._next_corr()
        fut = asyncio.get_running_loop().create_future()
        self._pending[corr] = fut
        try:
            await self._send(dest, Envelope(kind, corr, body))
            return await self._wait(fut, timeout, "%s to %s" % (kind.name, dest))
        finally:
            self._pending.pop(corr, None)

    async def _wait(self, fut, timeout, what):
        t = self.timeout if timeout is None else timeout
        try:
            return await asyncio.wait_for(fut, t)
        except asyncio.TimeoutError:
            raise RequestTimeout("%s timed out after %gs" % (what, t)) from None

    def _fail_pending(self, corrs, exc: Exception):
        for c in corrs:
            fut = self._pending.get(c)
            if fut is None:
                fut = self._streams.get(c, (None, None))[1]
            if fut is not None and not fut.done():
                fut.set_exception(exc)

    # -- inbound -------------------------------------------------------------

    def _receive(self, peer, env: Envelope, reply) -> None:
        """``reply(Envelope)`` sends back over the same link."""
        if env.kind == Kind.SEND_BLOCKS:
            self._on_block_frame(peer, env, reply)
        elif env.kind == Kind.RESPONSE:
            self._on_response(env)
        else:
            t = asyncio.get_running_loop().create_task(self._serve(peer, env, reply))
            self._tasks.add(t)
            t.add_done_callback(self._tasks.discard)

    def _on_block_frame(self, peer, env, reply):
        if env.correlation == 0:
            try:
                self.handler.handle_block(self._decode(env.payload), peer)
            except (DecodeError, ValueError) as e:
                log.debug("%s: dropped posted block from %s: %s", self.address, peer, e)
            return
        key = (peer, env.correlation)
        st = self._inbound.get(key)
        if st is None:
            st = self._inbound[key] = _Inbound()
        if not env.payload:
            del self._inbound[key]
            reply(Envelope(Kind.RESPONSE, env.correlation,
                           encode_response(StreamDone(st.delivered, st.errors))))
            return
        off = st.offset
        st.offset += 1
        try:
            self.handler.handle_block(self._decode(env.payload), peer)
            st.delivered += 1
        except (DecodeError, ValueError) as e:
            st.errors += 1
            reply(Envelope(Kind.RESPONSE, env.correlation,
                           encode_response(StreamError(off, str(e)))))

    async def _serve(self, peer, env, reply):
        try:
            res = await self.handler.handle_request(env.kind, env.payload, peer)
        except (DecodeError, ValueError) as e:
            res = Result(error="bad request: %s" % e)
        except asyncio.CancelledError:
            raise
        except Exception as e:  # a handler bug must still answer the caller
            log.exception("%s: handler failed", self.address)
            res = Result(error="internal error: %s" % e)
        try:
            reply(Envelope(Kind.RESPONSE, env.correlation, encode_response(res)))
        except TransportError as e:
            log.debug("%s: reply to %s lost: %s", self.address, peer, e)

    def _on_response(self, env):
        try:
            r = decode_response(env.payload)
        except (FrameError, DecodeError) as e:
            log.warning("%s: undecodable response: %s", self.address, e)
            return
        if isinstance(r, Result):
            fut = self._pending.get(env.correlation)
            if fut is not None and not fut.done():
                fut.set_result(r)
            return
        entry = self._streams.get(env.correlation)
        if entry is None:
            return
        report, fut = entry
        if isinstance(r, StreamError):
            report.errors.append(r)
        elif not fut.done():
            report.delivered = r.delivered
            fut.set_result(report)


def _payload(b) -> bytes:
    if isinstance(b, Block):
        return b.encoded
    if isinstance(b, (bytes, bytearray, memoryview)):
        return bytes(b)
    raise TypeError("expected a Block or raw frame bytes, got %r" % type(b))
