import asyncio
import hashlib
import math
import random

import pytest

from charlotte.core import NakamotoPoW, Opaque, Pattern, SigningKey, StoreForever
from charlotte.fern import (NakamotoFern, PowChainConfig, Requirement, best_chain,
                            leading_zero_bits, mine, pow_ok, search)
from charlotte.fern.nakamoto import _prefix
from charlotte.node import sim_node
from charlotte.transport import Kind, SimNetwork, run_sim

ROOT = Opaque(b"pow-root")


def test_prefix_matches_canonical_encoding():
    b = Opaque(b"x")
    att = NakamotoPoW(block=b.ref(), parent=ROOT.ref(), nonce=0x0102030405060708)
    assert _prefix(b.ref(), ROOT.ref()) + (0x0102030405060708).to_bytes(8, "big") == att.encoded
    assert hashlib.sha3_256(att.encoded).digest() == att.hash.digest


def test_difficulty_zero_takes_nonce_zero():
    att, attempts = mine(Opaque(b"x").ref(), ROOT.ref(), 0)
    assert att.nonce == 0 and attempts == 1 and pow_ok(att, 0)


def test_predicate_rejects_bad_nonce():
    att, _ = mine(Opaque(b"x").ref(), ROOT.ref(), 10)
    assert pow_ok(att, 10) and leading_zero_bits(att.hash.digest) >= 10
    bad = NakamotoPoW(block=att.block, parent=att.parent, nonce=att.nonce + 1)
    if leading_zero_bits(bad.hash.digest) < 10:
        assert not pow_ok(bad, 10)
    with pytest.raises(ValueError):
        mine(Opaque(b"x").ref(), ROOT.ref(), 65)


def test_attempts_follow_geometric_law():
    d, trials = 8, 1000
    p = 2.0 ** -d
    total = 0
    for i in range(trials):
        _, a = search(Opaque(b"g%d" % i).ref(), ROOT.ref(), d)
        total += a
    mean = total / trials
    sigma = math.sqrt((1 - p) / p ** 2 / trials)  # sd of the sample mean
    assert abs(mean - 1 / p) <= 3 * sigma, (mean, sigma)


def brute_longest(blocks, root_hash, d):
    """Enumerate every root path explicitly and take the max by (length, -tip)."""
    valid = [b for b in blocks if pow_ok(b, d)]
    by = {b.hash: b for b in valid}
    paths = []
    for b in valid:
        path, h = [], b.hash
        while h in by:
            path.append(by[h])
            h = by[h].parent.hash
        if h == root_hash:
            paths.append(path[::-1])
    if not paths:
        return []
    L = max(len(p) for p in paths)
    return min((p for p in paths if len(p) == L), key=lambda p: p[-1].hash.digest)


def test_best_chain_matches_brute_force():
    rng = random.Random("pow-tree")
    for trial in range(40):
        d = 2
        nodes = [ROOT.ref()]
        blocks = []
        for i in range(rng.randint(0, 50)):
            parent = rng.choice(nodes)
            att, _ = mine(Opaque(b"%d-%d" % (trial, i)).ref(), parent, d, rng.randrange(1 << 20))
            if rng.random() < 0.1:  # an invalid one now and then
                att = NakamotoPoW(block=att.block, parent=att.parent, nonce=att.nonce + 1)
            blocks.append(att)
            nodes.append(att.ref())
        assert best_chain(blocks, ROOT.hash, d) == brute_longest(blocks, ROOT.hash, d)


def test_fork_prefers_longer():
    a1, _ = mine(Opaque(b"a1").ref(), ROOT.ref(), 1)
    a2, _ = mine(Opaque(b"a2").ref(), a1.ref(), 1)
    b1, _ = mine(Opaque(b"b1").ref(), ROOT.ref(), 1)
    b2, _ = mine(Opaque(b"b2").ref(), b1.ref(), 1)
    b3, _ = mine(Opaque(b"b3").ref(), b2.ref(), 1)
    assert best_chain([a1, a2, b1, b2, b3], ROOT.hash, 1) == [b1, b2, b3]


def miners(n, cfg):
    net = SimNetwork()
    nodes = [sim_node(net, "m%d" % i) for i in range(n)]
    addrs = [nd.address for nd in nodes]
    ferns = [nd.add(NakamotoFern(cfg, peers=addrs, index=i)) for i, nd in enumerate(nodes)]
    return net, ferns


def test_k1_single_miner_responds_after_own_block():
    cfg = PowChainConfig(ROOT.ref(), difficulty_bits=10, k=1, hash_rate=1024.0)
    net, (m,) = miners(1, cfg)
    blk = Opaque(b"client")

    async def main():
        ep = net.endpoint("c")
        t0 = net.now_ms()
        r = await ep.request(m.node.address, Kind.REQ_INTEGRITY,
                             Pattern(NakamotoPoW, block=blk.ref()).encode())
        return r, net.now_ms() - t0

    r, dt = run_sim(main())
    att = r.blocks[0]
    assert r.ok and len(r.blocks) == 1 and att.block.hash == blk.hash and pow_ok(att, 10)
    # two link delays plus attempts / rate seconds of mining
    assert dt >= 200 and abs(dt - 200 - 1000 * m.hashes / 1024.0) < 2


def test_k2_waits_for_a_descendant():
    cfg = PowChainConfig(ROOT.ref(), difficulty_bits=8, k=2, hash_rate=4096.0)
    net, ms = miners(2, cfg)
    blk = Opaque(b"client")

    async def main():
        ep = net.endpoint("c")
        return await ep.request(ms[0].node.address, Kind.REQ_INTEGRITY,
                                Pattern(NakamotoPoW, block=blk.ref()).encode())

    r = run_sim(main())
    assert r.ok and len(r.blocks) == 2
    first, second = r.blocks
    assert first.block.hash == blk.hash and second.parent.hash == first.hash


def test_availability_policy_error():
    w = SigningKey.derive(0, "w")
    cfg = PowChainConfig(ROOT.ref(), difficulty_bits=4, required_availability=Requirement(1, {w.id}))
    net, (m,) = miners(1, cfg)
    blk = Opaque(b"client")
    sf = StoreForever.signed(w, subject=blk.ref(), covered=[])

    async def main():
        ep = net.endpoint("c")
        bad = await ep.request(m.node.address, Kind.REQ_INTEGRITY,
                               Pattern(NakamotoPoW, block=blk.ref()).encode())
        await ep.post_blocks(m.node.address, [sf])
        good = await ep.request(m.node.address, Kind.REQ_INTEGRITY,
                                Pattern(NakamotoPoW, block=blk.ref(availability=[sf.hash])).encode())
        return bad, good

    bad, good = run_sim(main())
    assert bad.error.startswith("policy:") and good.ok


def test_competing_miners_agree_on_prefix():
    cfg = PowChainConfig(ROOT.ref(), difficulty_bits=8, k=1, hash_rate=2048.0)
    net, ms = miners(4, cfg)
    blocks = [Opaque(b"b%d" % i) for i in range(12)]

    async def main():
        ep = net.endpoint("c")
        res = []
        for i, b in enumerate(blocks):
            res.append(await ep.request(ms[i % 4].node.address, Kind.REQ_INTEGRITY,
                                        Pattern(NakamotoPoW, block=b.ref()).encode()))
        await asyncio.sleep(3)
        return res

    res = run_sim(main())
    assert all(r.ok for r in res)
    chains = [m.chain() for m in ms]
    shortest = min(len(c) for c in chains)
    assert all(c[:shortest - 1] == chains[0][:shortest - 1] for c in chains)
    for c in chains:
        assert all(pow_ok(a, 8) for a in c)
        assert c[0].parent.hash == ROOT.hash
        assert all(y.parent.hash == x.hash for x, y in zip(c, c[1:]))
