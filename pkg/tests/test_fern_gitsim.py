import random

import pytest

from charlotte.core import GitBranch, Pattern, SigningKey
from charlotte.fern import GitFern, GitPolicy, is_ancestor, linearity_violations, make_commit
from charlotte.fern.policy import EvidenceError
from charlotte.node import sim_node
from charlotte.store import BlockStore
from charlotte.transport import Kind, SimNetwork, run_sim

AUTHOR = SigningKey.derive(0, "author")


def commit(tag, *parents):
    return make_commit(AUTHOR, tag, tag.encode(), [(p.ref(), b"diff") for p in parents])


def random_commit_dag(rng, n):
    cs = []
    for i in range(n):
        k = 0 if not cs else rng.choice((1, 1, 1, 2, 3))
        cs.append(commit("c%d" % i, *rng.sample(cs, min(k, len(cs)))))
    return cs


def closure(cs):
    """Reflexive-transitive closure by repeated squaring over index sets."""
    idx = {c.hash: i for i, c in enumerate(cs)}
    anc = [{i} | {idx[r.hash] for r, _ in c.parents} for i, c in enumerate(cs)]
    changed = True
    while changed:
        changed = False
        for s in anc:
            grown = set().union(*(anc[j] for j in s))
            if grown != s:
                s |= grown
                changed = True
    return anc


def test_is_ancestor_matches_closure_oracle():
    rng = random.Random("git-dag")
    for n in (1, 5, 50, 200):
        cs = random_commit_dag(rng, n)
        store = BlockStore()
        for c in cs:
            store.add(c)
        anc = closure(cs)
        pairs = [(i, j) for i in range(n) for j in range(n)]
        for i, j in rng.sample(pairs, min(len(pairs), 2000)):
            assert is_ancestor(cs[i].hash, cs[j].hash, store) == (i in anc[j])


def test_linear_chain_and_reflexive():
    a = commit("a")
    b = commit("b", a)
    c = commit("c", b)
    s = BlockStore()
    for x in (a, b, c):
        s.add(x)
    assert is_ancestor(a.hash, a.hash, s)
    assert is_ancestor(a.hash, c.hash, s) and not is_ancestor(c.hash, a.hash, s)


def test_missing_commit_is_evidence_error():
    a = commit("a")
    b = commit("b", a)
    s = BlockStore()
    s.add(b)
    with pytest.raises(EvidenceError):
        is_ancestor(commit("z").hash, b.hash, s)


def test_budget_is_enforced():
    cs = [commit("r")]
    for i in range(30):
        cs.append(commit("x%d" % i, cs[-1]))
    s = BlockStore()
    for c in cs:
        s.add(c)
    with pytest.raises(EvidenceError):
        is_ancestor(commit("other").hash, cs[-1].hash, s, budget=10)


def fern(policy=None):
    net = SimNetwork()
    nd = sim_node(net, "git")
    return net, nd.add(GitFern(SigningKey.derive(0, "git"), policy))


def branch_req(name, c):
    return Pattern(GitBranch, branch_name=name, commit=c.ref()).encode()


def test_branch_updates():
    a = commit("a")
    b = commit("b", a)
    sib = commit("sib", a)
    merge = commit("m", sib, b)
    net, g = fern()

    async def main():
        ep = net.endpoint("c")
        await ep.post_blocks(g.node.address, [a, b, sib, merge])
        out = []
        for c in (a, b, sib, merge, b):
            out.append(await ep.request(g.node.address, Kind.REQ_INTEGRITY, branch_req("main", c)))
        return out

    r_a, r_b, r_sib, r_merge, r_back = run_sim(main())
    assert r_a.ok and r_b.ok
    assert r_sib.error.startswith("refused:")
    assert r_merge.ok and g.head("main") == merge.hash
    assert r_back.error.startswith("refused:")
    assert r_merge.blocks[0].branch_name == "main" and r_merge.blocks[0].signature_ok


def test_policy_and_evidence_errors():
    other = SigningKey.derive(0, "other")
    stranger = make_commit(other, "s", b"s")
    missing = commit("missing")
    net, g = fern(GitPolicy(allowed_authors=frozenset({AUTHOR.id})))

    async def main():
        ep = net.endpoint("c")
        await ep.post_blocks(g.node.address, [stranger])
        r1 = await ep.request(g.node.address, Kind.REQ_INTEGRITY, branch_req("x", stranger))
        r2 = await ep.request(g.node.address, Kind.REQ_INTEGRITY, branch_req("x", missing))
        return r1, r2

    r1, r2 = run_sim(main())
    assert r1.error.startswith("policy:")
    assert r2.error.startswith("evidence:")


def test_randomized_linearity():
    rng = random.Random("git-work")
    net, g = fern()
    branches = ["main", "dev", "rel"]
    commits = [commit("root")]

    async def main():
        ep = net.endpoint("c")
        await ep.post_blocks(g.node.address, commits)
        refused = 0
        for i in range(1000):
            name = rng.choice(branches)
            head = g.head(name)
            if head is not None and rng.random() < 0.3:
                # adversarial: a commit that does not descend from the head
                c = commit("adv%d" % i, rng.choice(commits))
            else:
                base = [x for x in commits if x.hash == head] or [rng.choice(commits)]
                extra = [rng.choice(commits)] if rng.random() < 0.2 else []
                c = commit("w%d" % i, *(base + extra))
            commits.append(c)
            await ep.post_blocks(g.node.address, [c])
            r = await ep.request(g.node.address, Kind.REQ_INTEGRITY, branch_req(name, c))
            refused += not r.ok
        return refused

    refused = run_sim(main())
    assert refused > 0 and len(g.issued) > 500
    assert linearity_violations(g.issued, g.node.store) == []
