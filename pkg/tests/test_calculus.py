import random
from itertools import combinations, permutations

import pytest

from charlotte.calculus import (
    COMMIT,
    STORE,
    Adds,
    Attestation,
    Belief,
    Model,
    NotAState,
    Universe,
    adds,
    adds_intersection,
    adds_union,
    all_universes,
    availability_monotonicity_violations,
    interpret_exclusive_commit,
    interpret_store_forever,
    is_available,
    is_incontrovertible,
    main_chain_ordered,
    quorum_belief,
    refine,
    view,
)
from charlotte.calculus import theorems as th
from charlotte.calculus.examples import single_slot_model
from charlotte.calculus.modelfile import ModelFormatError, dump_model, parse_model


@pytest.fixture(scope="module")
def slot():
    m = single_slot_model()
    return m, m.initial_belief(), m.adds["R"]


def literal_possible(belief, observed):
    # direct transcription of the displayed refinement set
    out = []
    for u in belief:
        if not set(observed) <= u.exist:
            continue
        ok = True
        for b in observed:
            for (bp, c) in u.before:
                if c == b and not (bp in observed and observed.index(bp) < observed.index(b)):
                    ok = False
        if ok:
            out.append(u)
    return Belief(out)


THREE = all_universes(["a", "b", "c"], with_orders=True)


# -- refine ------------------------------------------------------------------

def test_single_slot_ix_eliminates_iy(slot):
    m, alpha, _ = slot
    assert any("i_y" in u.exist for u in alpha)
    after = refine(alpha, ["i_x"])
    assert after.universes and not any("i_y" in u.exist for u in after)


def test_refine_empty_observation(slot):
    _, alpha, _ = slot
    assert refine(alpha, []) == alpha


def test_refine_prefix_composition_exhaustive():
    alpha = Belief(THREE)
    for a, b in permutations(["a", "b", "c"], 2):
        assert refine(refine(alpha, [a]), [a, b]) == refine(alpha, [a, b])


def test_refine_matches_literal_definition():
    alpha = Belief(THREE)
    blocks = ["a", "b", "c"]
    for r in range(4):
        for obs in permutations(blocks, r):
            got = refine(alpha, list(obs))
            assert got == literal_possible(alpha, list(obs))
            assert got <= alpha


def test_integrity_monotonicity_on_prefixes():
    # C a prefix of the observation sequence B: possible(B) within possible(C)
    alpha = Belief(THREE)
    for obs in permutations(["a", "b", "c"]):
        for k in range(4):
            assert refine(alpha, list(obs)) <= refine(alpha, list(obs[:k]))


def test_integrity_monotonicity_fails_for_non_prefix_subsets():
    # a universe ordering a before b survives observing [a, b] but not [b]
    u = Universe({"a", "b"}, set(), {("a", "b")})
    alpha = Belief([u])
    assert u in refine(alpha, ["a", "b"])
    assert u not in refine(alpha, ["b"])


# -- availability / incontrovertibility ---------------------------------------

def test_available_after_store_attestation(slot):
    _, alpha, _ = slot
    assert not is_available(alpha, {"x"})
    assert is_available(refine(alpha, ["a_x"]), {"x"})


def test_available_empty_set_and_degenerate():
    assert is_available(Belief(THREE), set())
    u = Universe({"b"}, set())
    assert not is_available(Belief([u]), {"b"})
    empty = Belief()
    assert is_available(empty, {"zzz"}) and empty.degenerate and empty.diagnostics()


def test_incontrovertible_after_commit(slot):
    _, alpha, r = slot
    assert is_incontrovertible(refine(alpha, ["i_x"]), r, {"i_x", "x"})
    assert not is_incontrovertible(alpha, r, {"i_x", "x"})


def test_incontrovertible_empty_state():
    d = adds(set(), {"a"}, {"a", "b"})
    assert is_incontrovertible(Belief(THREE), d, set())


def test_incontrovertible_false_with_conflicting_universe():
    r = adds(set(), {"x", "i_x"}, {"y", "i_y"})
    u = Universe({"x", "i_x", "y", "i_y"}, {"x", "i_x"})
    assert not is_incontrovertible(Belief([u]), r, {"x", "i_x"})


def test_incontrovertible_rejects_non_state():
    with pytest.raises(NotAState):
        is_incontrovertible(Belief(THREE), adds({"a"}), {"b"})


# -- view ----------------------------------------------------------------------

def test_single_slot_view(slot):
    _, alpha, r = slot
    assert view(refine(alpha, ["a_x", "i_x"]), r) == {"x", "i_x"}
    assert view(alpha, r) == frozenset()


def test_view_of_only_empty_state():
    assert view(Belief(THREE), adds(set())) == frozenset()


def test_view_grows_under_refine_random_models():
    rng = random.Random(11)
    blocks = ["a", "b", "c", "d"]
    pool = all_universes(blocks)
    for _ in range(1000):
        alpha = Belief(rng.sample(pool, rng.randrange(1, 12)))
        states = [frozenset(x for x in blocks if rng.random() < 0.5) for _ in range(rng.randrange(1, 5))]
        d = Adds(frozenset(states))
        obs = rng.sample(blocks, rng.randrange(0, 4))
        assert view(refine(alpha, obs), d) >= view(alpha, d)


# -- ADDS composition ----------------------------------------------------------

def test_union_identity_and_intersection_identity():
    d = adds({"a"}, {"b", "c"}, set())
    assert adds_union(d, adds(set())) == d
    assert adds_intersection(d, adds({"a", "b", "c"})) == d


def test_theorem_checker_agrees_with_explicit_model():
    labels = th.ground_labels(3)
    rep = th.check_composition_theorems(3, examples=20)
    for name, exs in (("union", rep.union_examples), ("intersection", rep.intersection_examples)):
        for b, d1, d2, lhs, rhs in exs:
            got_l, got_r = th.direct_check(b, d1, d2, labels, name)
            assert got_l == th.mask_to_state(lhs, labels)
            assert got_r == th.mask_to_state(rhs, labels)
            assert got_l != got_r
    rng = random.Random(5)
    beliefs = th.canonical_beliefs(3)
    for _ in range(300):
        b = rng.choice(beliefs)
        d1, d2 = rng.randrange(256), rng.randrange(256)
        for name in ("union", "intersection"):
            got_l, got_r = th.direct_check(b, d1, d2, labels, name)
            op = (lambda s, t: s | t) if name == "union" else (lambda s, t: s & t)
            comb = 0
            for s in range(8):
                for t in range(8):
                    if d1 >> s & 1 and d2 >> t & 1:
                        comb |= 1 << op(s, t)
            assert got_l == th.mask_to_state(th.view_mask(b, comb, 3), labels)


def test_belief_reduction_preserves_view():
    labels = th.ground_labels(3)
    rng = random.Random(9)
    for _ in range(400):
        alpha = Belief(rng.sample(THREE, rng.randrange(0, 6)))
        canon = th.canonicalize(alpha, labels)
        assert canon in th.canonical_beliefs(3)
        rebuilt = th.belief_from_canonical(canon, labels)
        d = th.adds_from_mask(rng.randrange(256), labels)
        assert view(alpha, d) == view(rebuilt, d)


def test_canonical_class_count():
    # 20 antichains on 3 points minus the empty one, each with every A under
    # their meet, plus the empty belief
    assert len(th.antichains(3)) == 19
    assert len(th.canonical_beliefs(3)) == 42


# -- interpretations -----------------------------------------------------------

def test_store_forever_excludes_unavailable_subject(slot):
    m, _, _ = slot
    kept = interpret_store_forever("alice", m)
    bad = Universe({"a_x", "x", "i_x"}, {"i_x"})
    assert bad in m.universes and bad not in kept
    bare = Universe({"x"}, set())
    assert bare in kept


def _literal_monotone_violations(belief):
    us = list(belief)
    n = 0
    for u in us:
        for v in us:
            for w in us:
                if (u.exist | v.exist) <= w.exist and not (u.avail | v.avail) <= w.avail:
                    n += 1
    return n


def test_availability_monotonicity_on_attestation_driven_model():
    # availability exactly what existing pledges promise
    m = Model(blocks=["x", "y", "ax", "ay"], attestations={
        "ax": Attestation(STORE, "alice", {"x"}), "ay": Attestation(STORE, "alice", {"y"})})
    us = []
    for u in all_universes(m.blocks):
        promised = set()
        for bid, a in m.attestations.items():
            if bid in u.exist:
                promised |= a.subjects
        if u.avail == promised & u.exist:
            us.append(u)
    m.universes = us
    kept = interpret_store_forever("alice", m)
    assert len(kept) > 1
    assert _literal_monotone_violations(kept) == 0
    assert availability_monotonicity_violations(kept) == []


def test_availability_monotonicity_fails_on_unconstrained_model(slot):
    m, _, _ = slot
    kept = interpret_store_forever("alice", m)
    assert availability_monotonicity_violations(kept, limit=1)


def test_exclusive_commit(slot):
    m, _, _ = slot
    kept = interpret_exclusive_commit("fern", m)
    assert Universe({"i_x", "i_y"}, set()) not in kept
    assert Universe({"i_x"}, set()) in kept


def test_three_issuer_quorum_composition():
    blocks = ["c1x", "c1y", "c2x", "c2y", "c3x", "c3y"]
    atts = {}
    for i in (1, 2, 3):
        atts["c%dx" % i] = Attestation(COMMIT, "f%d" % i, {"x"}, "slot")
        atts["c%dy" % i] = Attestation(COMMIT, "f%d" % i, {"y"}, "slot")
    m = Model(blocks=blocks + ["x", "y"], attestations=atts)
    m.universes = [Universe(e, frozenset()) for e in
                   [frozenset(c) for r in range(len(blocks) + 1) for c in combinations(blocks, r)]]
    each = {"f%d" % i: interpret_exclusive_commit("f%d" % i, m) for i in (1, 2, 3)}
    q = quorum_belief(each, [("f1", "f2"), ("f2", "f3"), ("f1", "f3")])

    def equivocators(u):
        return sum(1 for i in (1, 2, 3) if {"c%dx" % i, "c%dy" % i} <= u.exist)

    assert q == Belief(u for u in m.universes if equivocators(u) <= 1)
    both = each["f1"] & each["f2"] & each["f3"]
    assert both == Belief(u for u in m.universes if equivocators(u) == 0)
    assert (each["f1"] | each["f2"]) == Belief(u for u in m.universes if
                                               not ({"c1x", "c1y"} <= u.exist and {"c2x", "c2y"} <= u.exist))


def test_main_chain_helper():
    u_ok = Universe({"m1", "s1"}, set(), {("m1", "s1")})
    u_bad = Universe({"m1", "s1"}, set())
    h = {"m1": 1, "s1": 1}
    assert main_chain_ordered(u_ok, h, ["m1"])
    assert not main_chain_ordered(u_bad, h, ["m1"])


# -- model files -------------------------------------------------------------

def test_model_file_roundtrip(slot):
    m, _, _ = slot
    text = dump_model(m)
    again = parse_model(text)
    assert set(again.universes) == set(m.universes)
    assert again.attestations == m.attestations
    assert again.adds == m.adds and again.trust == m.trust
    assert dump_model(again) == text


def test_model_file_explicit_universe_and_errors():
    m = parse_model("blocks a b\nuniverse\nexist a b\navail a\norder a<b\n")
    assert m.universes == [Universe({"a", "b"}, {"a"}, {("a", "b")})]
    for bad, line in [("blocks a\nexist a\n", 2), ("blocks a\nadds R = {q}\n", 2),
                      ("blocks a\nuniverse\navail a\n", 2), ("frobnicate\n", 1)]:
        with pytest.raises(ModelFormatError) as ei:
            parse_model(bad)
        assert ei.value.lineno == line
