import asyncio
import random

import pytest

from charlotte.core import Opaque
from charlotte.transport import (
    Envelope,
    Handler,
    Kind,
    NodeAddress,
    RequestTimeout,
    Result,
    SimDeadlock,
    SimNetwork,
    TcpEndpoint,
    TransportError,
    decode_response,
    encode_response,
    run_sim,
)
from charlotte.transport.frames import StreamDone, StreamError


class Recorder(Handler):
    def __init__(self, clock=None, delays=None):
        self.blocks = []
        self.times = []
        self.clock = clock
        self.delays = delays or {}

    def handle_block(self, block, sender):
        if isinstance(block, Opaque) and block.payload == b"reject":
            raise ValueError("rejected on purpose")
        self.blocks.append(block)
        if self.clock:
            self.times.append(self.clock())

    async def handle_request(self, kind, body, sender):
        d = self.delays.get(body)
        if d:
            await asyncio.sleep(d)
        if body == b"hang":
            await asyncio.sleep(3600)
        return Result(blocks=(Opaque(b"echo:" + body),))


def sim_pair(**kw):
    net = SimNetwork(**kw)
    a = net.endpoint("a")
    rec = Recorder(clock=net.now_ms)
    net.endpoint("b", rec)
    return net, a, rec


B = NodeAddress.sim("b")


def test_envelope_bit_exact():
    env = Envelope(Kind.REQ_AVAIL, 0x0102030405060708, b"xy")
    assert env.encode() == bytes([2, 1, 2, 3, 4, 5, 6, 7, 8, 0, 0, 0, 2]) + b"xy"
    assert Envelope.decode(env.encode()) == env


def test_response_bodies_roundtrip():
    for r in (StreamError(3, "bad"), StreamDone(5, 1),
              Result(error="", refs=(Opaque(b"z").ref(),), blocks=(Opaque(b"q"),))):
        assert decode_response(encode_response(r)) == r


def test_send_three_blocks_no_errors():
    async def main():
        net, a, rec = sim_pair()
        blocks = [Opaque(bytes([i])) for i in range(3)]
        rep = await a.send_blocks(B, blocks)
        return rep, rec.blocks, blocks

    rep, got, sent = run_sim(main())
    assert rep.errors == [] and rep.delivered == 3
    assert got == sent


def test_malformed_frame_reports_offset():
    async def main():
        net, a, rec = sim_pair()
        r1 = await a.send_blocks(B, [b"\xff\x00"])
        r2 = await a.send_blocks(B, [Opaque(b"1"), b"\x01garbage", Opaque(b"reject"), Opaque(b"3")])
        return r1, r2

    r1, r2 = run_sim(main())
    assert [e.offset for e in r1.errors] == [0] and r1.delivered == 0
    assert [e.offset for e in r2.errors] == [1, 2] and r2.delivered == 2


def test_first_delivery_at_one_way_latency():
    async def main():
        net, a, rec = sim_pair(latency_ms=100)
        await a.post_blocks(B, [Opaque(b"x")])
        await asyncio.sleep(1)
        return rec.times

    assert run_sim(main()) == [pytest.approx(100.0, abs=1e-6)]


def test_request_round_trip_is_two_latencies():
    async def main():
        net, a, rec = sim_pair(latency_ms=100)
        t0 = net.now_ms()
        res = await a.request(B, Kind.WILBUR_QUERY, b"ping")
        return net.now_ms() - t0, res

    dt, res = run_sim(main())
    assert dt == pytest.approx(200.0, abs=1e-6)
    assert res.ok and res.blocks[0].payload == b"echo:ping"


def test_unreachable_node():
    async def main():
        net, a, _ = sim_pair()
        with pytest.raises(TransportError):
            await a.request(NodeAddress.sim("nobody"), Kind.REQ_AVAIL, b"")
        return True

    assert run_sim(main())


def test_timeout_and_crash():
    async def main():
        net, a, rec = sim_pair()
        with pytest.raises(RequestTimeout):
            await a.request(B, Kind.REQ_INTEGRITY, b"hang", timeout=2)
        net.crash("b")
        t0 = net.now_ms()
        with pytest.raises(RequestTimeout):
            await a.request(B, Kind.REQ_INTEGRITY, b"x", timeout=1.5)
        waited = net.now_ms() - t0
        net.recover("b")
        ok = await a.request(B, Kind.REQ_INTEGRITY, b"x")
        return waited, ok

    waited, ok = run_sim(main())
    assert waited == pytest.approx(1500.0, abs=1e-6) and ok.ok


def test_interleaved_requests_keep_correlation():
    rng = random.Random(3)
    bodies = [b"r%d" % i for i in range(1000)]
    delays = {b: rng.uniform(0, 0.5) for b in bodies}

    async def main():
        net = SimNetwork(latency_ms=100, seed=1, jitter=True)
        a = net.endpoint("a")
        net.endpoint("b", Recorder(delays=delays))
        res = await asyncio.gather(*(a.request(B, Kind.WILBUR_QUERY, b) for b in bodies))
        return [r.blocks[0].payload for r in res]

    got = run_sim(main())
    assert got == [b"echo:" + b for b in bodies]


def test_fifo_per_link_with_jitter():
    async def main():
        net = SimNetwork(latency_ms=100, seed=9, jitter=True)
        a = net.endpoint("a")
        rec = Recorder()
        net.endpoint("b", rec)
        for i in range(200):
            await a.post_blocks(B, [Opaque(b"%d" % i)])
            await asyncio.sleep(0.001)
        await asyncio.sleep(1)
        return [b.payload for b in rec.blocks]

    assert run_sim(main()) == [b"%d" % i for i in range(200)]


def _traced_run(seed):
    async def main():
        net = SimNetwork(latency_ms=100, seed=seed, jitter=True)
        net.trace = []
        eps = [net.endpoint("n%d" % i, Recorder()) for i in range(4)]
        rng = random.Random(seed)
        jobs = []
        for k in range(60):
            src, dst = rng.sample(eps, 2)
            jobs.append(src.request(dst.address, Kind.WILBUR_QUERY, b"%d" % k))
        await asyncio.gather(*jobs)
        return net.trace

    return run_sim(main())


def test_sim_determinism():
    assert _traced_run(5) == _traced_run(5)
    assert _traced_run(5) != _traced_run(6)


def test_deadlock_is_reported():
    async def main():
        await asyncio.get_running_loop().create_future()

    with pytest.raises(SimDeadlock):
        run_sim(main())


def test_address_parsing():
    assert NodeAddress.parse("sim:x") == NodeAddress.sim("x")
    assert NodeAddress.parse("localhost:9001") == NodeAddress.tcp("localhost", 9001)
    assert NodeAddress.parse(":9001") == NodeAddress.tcp("127.0.0.1", 9001)
    assert str(NodeAddress.parse("tcp:h:1")) == "tcp:h:1"
    with pytest.raises(ValueError):
        NodeAddress.parse("nope")


# -- tcp ---------------------------------------------------------------------

async def _script(a, dest):
    """The same observable workload for both backends."""
    out = []
    rep = await a.send_blocks(dest, [Opaque(b"1"), b"\x01bad", Opaque(b"2")])
    out.append(("stream", rep.delivered, [(e.offset) for e in rep.errors]))
    res = await asyncio.gather(*(a.request(dest, Kind.WILBUR_QUERY, b"q%d" % i) for i in range(100)))
    out.append(("requests", [r.blocks[0].payload for r in res]))
    return out


def test_tcp_backend_and_equivalence():
    async def tcp_main():
        rec = Recorder()
        srv = await TcpEndpoint("127.0.0.1", 0, rec).start()
        cli = await TcpEndpoint("127.0.0.1", 0).start()
        try:
            out = await _script(cli, srv.address)
            with pytest.raises(TransportError):
                dead = await TcpEndpoint("127.0.0.1", 0).start()
                addr = dead.address
                await dead.close()
                await cli.request(addr, Kind.REQ_AVAIL, b"", timeout=5)
            return out, [b.payload for b in rec.blocks], cli.bytes_sent > 0
        finally:
            await cli.close()
            await srv.close()

    async def sim_main():
        net, a, rec = sim_pair()
        return await _script(a, B), [b.payload for b in rec.blocks], a.bytes_sent > 0

    tcp = asyncio.run(tcp_main())
    sim = run_sim(sim_main())
    assert tcp == sim
    assert tcp[0][0] == ("stream", 2, [1])
