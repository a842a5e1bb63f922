import asyncio

from charlotte.core import ChainSlot, Opaque, Pattern, SigningKey, StoreForever
from charlotte.fern import (AgreementConfig, AgreementFern, Requirement, conflicting_quorums,
                            equivocations, quorum_size)
from charlotte.fern.safety import check_agreement_safety, run_schedule
from charlotte.node import sim_node
from charlotte.transport import Kind, SimNetwork, run_sim

ROOT = Opaque(b"root")


def ferns(n=4, config=None, net=None):
    net = net or SimNetwork()
    out = []
    for i in range(n):
        nd = sim_node(net, "f%d" % i)
        out.append(nd.add(AgreementFern(SigningKey.derive(0, "f%d" % i), config)))
    return net, out


def slot_req(block, slot=1, parent=None):
    parent = parent or ROOT.ref()
    return Pattern(ChainSlot, block=block, root=ROOT.ref(), slot=slot, parent=parent).encode()


def test_quorum_size():
    assert [quorum_size(f) for f in (1, 2, 3)] == [3, 5, 7]


def test_attest_and_refuse_conflict_and_idempotent():
    net, fs = ferns(1)
    a, b = Opaque(b"a"), Opaque(b"b")

    async def main():
        ep = net.endpoint("c")
        r1 = await ep.request(fs[0].node.address, Kind.REQ_INTEGRITY, slot_req(a.ref()))
        r2 = await ep.request(fs[0].node.address, Kind.REQ_INTEGRITY, slot_req(b.ref()))
        r3 = await ep.request(fs[0].node.address, Kind.REQ_INTEGRITY, slot_req(a.ref()))
        return r1, r2, r3

    r1, r2, r3 = run_sim(main())
    assert r1.ok and r1.blocks[0].signature_ok and r1.blocks[0].slot == 1
    assert r2.error.startswith("refused:") and a.hash.hex()[:16] in r2.error
    assert r3.ok and r3.blocks[0].encoded == r1.blocks[0].encoded


def test_slot_one_must_name_root():
    net, fs = ferns(1)

    async def main():
        ep = net.endpoint("c")
        return await ep.request(fs[0].node.address, Kind.REQ_INTEGRITY,
                                slot_req(Opaque(b"a").ref(), 1, Opaque(b"x").ref()))

    assert run_sim(main()).error.startswith("policy:")


def test_parent_integrity_requirement():
    net, fs = ferns(4, AgreementConfig(parent_integrity=Requirement(3)))
    a, b = Opaque(b"a"), Opaque(b"b")

    async def main():
        ep = net.endpoint("c")
        atts = []
        for f in fs:
            r = await ep.request(f.node.address, Kind.REQ_INTEGRITY, slot_req(a.ref()))
            atts.extend(r.blocks)
        good = a.ref(integrity=[x.ref() for x in atts[:3]])
        weak = a.ref(integrity=[x.ref() for x in atts[:2]])
        for f in fs[:2]:
            await ep.post_blocks(f.node.address, atts)
        ok = await ep.request(fs[0].node.address, Kind.REQ_INTEGRITY, slot_req(b.ref(), 2, good))
        bad = await ep.request(fs[1].node.address, Kind.REQ_INTEGRITY, slot_req(b.ref(), 2, weak))
        return ok, bad

    ok, bad = run_sim(main())
    assert ok.ok and ok.blocks[0].slot == 2
    assert bad.error.startswith("policy:") and "2 of 3" in bad.error


def test_availability_requirement():
    w = [SigningKey.derive(0, "w%d" % i) for i in range(2)]
    net, fs = ferns(1, AgreementConfig(block_availability=Requirement(2, {k.id for k in w})))
    a = Opaque(b"a")
    sfs = [StoreForever.signed(k, subject=a.ref(), covered=[]) for k in w]

    async def main():
        ep = net.endpoint("c")
        addr = fs[0].node.address
        await ep.post_blocks(addr, sfs)
        low = await ep.request(addr, Kind.REQ_INTEGRITY, slot_req(a.ref(availability=[sfs[0].hash])))
        hi = await ep.request(addr, Kind.REQ_INTEGRITY,
                              slot_req(a.ref(availability=[s.hash for s in sfs])))
        return low, hi

    low, hi = run_sim(main())
    assert low.error.startswith("policy:") and "1 of 2" in low.error
    assert hi.ok


def test_concurrent_conflicts_never_equivocate():
    net, fs = ferns(1)
    blocks = [Opaque(b"%d" % i) for i in range(20)]

    async def main():
        ep = net.endpoint("c")
        return await asyncio.gather(*(ep.request(fs[0].node.address, Kind.REQ_INTEGRITY,
                                                 slot_req(b.ref())) for b in blocks))

    res = run_sim(main())
    assert sum(r.ok for r in res) == 1
    assert equivocations(fs[0].issued) == []


def test_ledger_survives_restart(tmp_path):
    path = str(tmp_path / "ledger")
    a, b = Opaque(b"a"), Opaque(b"b")

    def once(block):
        net = SimNetwork()
        nd = sim_node(net, "f")
        nd.add(AgreementFern(SigningKey.derive(0, "f"), ledger=path))

        async def main():
            return await net.endpoint("c").request(nd.address, Kind.REQ_INTEGRITY, slot_req(block.ref()))

        return run_sim(main())

    assert once(a).ok
    assert once(b).error.startswith("refused:")


def test_exhaustive_safety_f1_f2():
    for f, runs in ((1, 4 * 8), (2, 21 * 32)):
        rep = check_agreement_safety(f)
        assert rep.runs == runs
        assert rep.ok, rep.violations[:3]
        assert rep.quorums_reached == runs


def test_harness_detects_too_many_equivocators():
    # f+1 equivocating ferns out of 4 can push both blocks to a quorum
    got, _ = run_schedule(1, {0, 1}, (True, False))
    assert conflicting_quorums(got, 3)
