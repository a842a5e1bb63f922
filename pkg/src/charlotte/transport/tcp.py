"""Stream-socket backend.  Every connection is symmetric: either side may send
any envelope kind, and replies travel back over the connection the request
arrived on."""
from __future__ import annotations

import asyncio
import logging
import time

from .address import NodeAddress
from .endpoint import Endpoint, Handler, TransportError
from .frames import HEADER, MAX_PAYLOAD, Envelope, FrameError, parse_kind

log = logging.getLogger(__name__)


class _Conn:
    __slots__ = ("writer", "corrs", "peer", "task")

    def __init__(self, writer, peer):
        self.writer = writer
        self.peer = peer
        self.corrs: set = set()
        self.task = None


class TcpEndpoint(Endpoint):
    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 handler: Handler | None = None, **kw):
        super().__init__(NodeAddress.tcp(host, port), handler, **kw)
        self._server = None
        self._out: dict = {}  # NodeAddress -> _Conn
        self._locks: dict = {}
        self._conns: set = set()
        self.bytes_sent = 0
        self.bytes_received = 0

    async def start(self) -> "TcpEndpoint":
        self._server = await asyncio.start_server(
            self._accept, self.address.host, self.address.port)
        port = self._server.sockets[0].getsockname()[1]
        self.address = NodeAddress.tcp(self.address.host, port)
        return self

    async def close(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for c in list(self._conns):
            c.writer.close()
            if c.task is not None:
                c.task.cancel()
        self._out.clear()

    def clock_ms(self) -> int:
        return int(time.time() * 1000)

    async def _accept(self, reader, writer):
        peer = writer.get_extra_info("peername")
        conn = _Conn(writer, NodeAddress.tcp(peer[0], peer[1]) if peer else None)
        self._conns.add(conn)
        conn.task = asyncio.current_task()
        await self._read_loop(reader, conn)

    async def _connection(self, dest: NodeAddress) -> _Conn:
        conn = self._out.get(dest)
        if conn is not None:
            return conn
        lock = self._locks.setdefault(dest, asyncio.Lock())
        async with lock:
            conn = self._out.get(dest)
            if conn is not None:
                return conn
            try:
                reader, writer = await asyncio.open_connection(dest.host, dest.port)
            except OSError as e:
                raise TransportError("unreachable %s: %s" % (dest, e)) from None
            conn = _Conn(writer, dest)
            self._conns.add(conn)
            self._out[dest] = conn
            conn.task = asyncio.get_running_loop().create_task(self._read_loop(reader, conn))
            return conn

    async def _send(self, dest, env: Envelope) -> None:
        if isinstance(dest, str):
            dest = NodeAddress.parse(dest)
        if dest.backend != "tcp":
            raise TransportError("tcp endpoint cannot reach %s" % dest)
        conn = await self._connection(dest)
        if env.correlation:
            conn.corrs.add(env.correlation)  # failed if this connection drops
        self._write(conn, env)
        try:
            await conn.writer.drain()
        except (ConnectionError, OSError) as e:
            raise TransportError("connection to %s lost: %s" % (dest, e)) from None

    def _write(self, conn: _Conn, env: Envelope):
        if conn.writer.is_closing():
            raise TransportError("connection to %s closed" % (conn.peer,))
        data = env.encode()
        self.bytes_sent += len(data)
        conn.writer.write(data)

    async def _read_loop(self, reader, conn: _Conn):
        try:
            while True:
                try:
                    head = await reader.readexactly(HEADER.size)
                except asyncio.IncompleteReadError:
                    return
                k, corr, ln = HEADER.unpack(head)
                if ln > MAX_PAYLOAD:
                    raise FrameError("frame of %d bytes exceeds limit" % ln)
                payload = await reader.readexactly(ln)
                self.bytes_received += HEADER.size + ln
                env = Envelope(parse_kind(k), corr, payload)
                self._receive(conn.peer, env, lambda e, c=conn: self._write(c, e))
        except (FrameError, asyncio.IncompleteReadError, ConnectionError, OSError) as e:
            log.debug("%s: dropping connection %s: %s", self.address, conn.peer, e)
        finally:
            self._conns.discard(conn)
            if self._out.get(conn.peer) is conn:
                del self._out[conn.peer]
            conn.writer.close()
            self._fail_pending(conn.corrs, TransportError("connection to %s lost" % (conn.peer,)))
