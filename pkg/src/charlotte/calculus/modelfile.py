"""Plain-text model files.

One directive per line; ``#`` starts a comment.

    blocks x y i_x i_y a_x a_y
    attest a_x store alice x i_x          # store-forever: issuer, covered blocks
    attest i_x commit fern R x            # exclusive commit: issuer, slot key, block
    adds R = {} {x i_x} {y i_y}
    trust store alice
    trust commit fern
    universes all                          # every (exist, avail) pair, empty order
    universes all-orders                   # ... and every strict order on exist
    universe                               # an explicit universe; the lines
    exist x i_x a_x                        # below attach to the latest one
    avail x i_x
    order x<i_x i_x<a_x

Block ids are whitespace-free tokens.  See docs/model-format.md.
"""
from __future__ import annotations

import re

from .interpret import COMMIT, STORE, Attestation, Model
from .model import Adds, Universe, all_universes


class ModelFormatError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__("line %d: %s" % (lineno, msg))
        self.lineno = lineno


_STATE = re.compile(r"\{([^{}]*)\}")


def parse_model(text: str) -> Model:
    m = Model(blocks=[])
    known: set = set()
    pending = None  # [exist, avail, order, lineno]
    explicit = []
    generated = None

    def flush():
        nonlocal pending
        if pending is None:
            return
        ex, av, order, ln = pending
        try:
            explicit.append(Universe(frozenset(ex), frozenset(av), frozenset(order)))
        except ValueError as e:
            raise ModelFormatError(ln, str(e)) from None
        pending = None

    def check(ln, ids):
        for b in ids:
            if b not in known:
                raise ModelFormatError(ln, "unknown block %r" % b)

    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        toks = rest.split()
        if word == "blocks":
            for b in toks:
                if b in known:
                    raise ModelFormatError(ln, "duplicate block %r" % b)
                known.add(b)
                m.blocks.append(b)
        elif word == "attest":
            if len(toks) < 3:
                raise ModelFormatError(ln, "attest needs: id kind issuer ...")
            bid, kind, issuer, args = toks[0], toks[1], toks[2], toks[3:]
            check(ln, [bid])
            if kind == STORE:
                check(ln, args)
                m.attestations[bid] = Attestation(STORE, issuer, frozenset(args))
            elif kind == COMMIT:
                if len(args) != 2:
                    raise ModelFormatError(ln, "commit attestation needs: key block")
                check(ln, args[1:])
                m.attestations[bid] = Attestation(COMMIT, issuer, frozenset(args[1:]), args[0])
            else:
                raise ModelFormatError(ln, "unknown attestation kind %r" % kind)
        elif word == "adds":
            name, eq, body = rest.partition("=")
            name = name.strip()
            if not eq or not name:
                raise ModelFormatError(ln, "adds needs: name = {..} {..}")
            states = []
            leftover = _STATE.sub("", body).strip()
            if leftover:
                raise ModelFormatError(ln, "unexpected text %r" % leftover)
            for inner in _STATE.findall(body):
                ids = inner.split()
                check(ln, ids)
                states.append(frozenset(ids))
            m.adds[name] = Adds(frozenset(states))
        elif word == "trust":
            if len(toks) != 2 or toks[0] not in (STORE, COMMIT):
                raise ModelFormatError(ln, "trust needs: store|commit issuer")
            m.trust.append((toks[0], toks[1]))
        elif word == "universes":
            if toks not in (["all"], ["all-orders"]):
                raise ModelFormatError(ln, "universes takes 'all' or 'all-orders'")
            generated = toks[0]
        elif word == "universe":
            flush()
            pending = [set(), set(), set(), ln]
        elif word in ("exist", "avail", "order"):
            if pending is None:
                raise ModelFormatError(ln, "%s outside a universe" % word)
            if word == "order":
                for tok in toks:
                    a, lt, b = tok.partition("<")
                    if not lt:
                        raise ModelFormatError(ln, "order pairs look like a<b")
                    check(ln, [a, b])
                    pending[2].add((a, b))
            else:
                check(ln, toks)
                pending[0 if word == "exist" else 1].update(toks)
        else:
            raise ModelFormatError(ln, "unknown directive %r" % word)
    flush()
    if generated:
        explicit.extend(all_universes(m.blocks, with_orders=(generated == "all-orders")))
    seen = set()
    m.universes = [u for u in explicit if not (u in seen or seen.add(u))]
    return m


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def dump_model(m: Model) -> str:
    """Serialise with explicit universes (never the generator shorthand)."""
    lines = ["blocks " + " ".join(map(str, m.blocks))]
    for bid, a in sorted(m.attestations.items(), key=lambda kv: str(kv[0])):
        if a.kind == STORE:
            lines.append("attest %s store %s %s" % (bid, a.issuer, " ".join(sorted(map(str, a.subjects)))))
        else:
            (sub,) = a.subjects
            lines.append("attest %s commit %s %s %s" % (bid, a.issuer, a.key, sub))
    for name, d in sorted(m.adds.items()):
        states = sorted(("{" + " ".join(sorted(map(str, s))) + "}" for s in d.states))
        lines.append("adds %s = %s" % (name, " ".join(states)))
    for kind, issuer in m.trust:
        lines.append("trust %s %s" % (kind, issuer))
    for u in sorted(m.universes, key=lambda u: (u.label(), sorted(u.before))):
        lines.append("universe")
        if u.exist:
            lines.append("exist " + " ".join(sorted(map(str, u.exist))))
        if u.avail:
            lines.append("avail " + " ".join(sorted(map(str, u.avail))))
        if u.before:
            lines.append("order " + " ".join("%s<%s" % p for p in sorted(u.before)))
    return "\n".join(lines) + "\n"
