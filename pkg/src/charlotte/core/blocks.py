"""Block variants and their canonical encoding.

Every block encodes as ``tag byte || record(fields)``; each field is
length-prefixed (see ``wire``).  Nested values are themselves records, so a
decoder never needs schema-external information.  A block's identity is
the SHA3-256 hash of that encoding.
"""
from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields
from functools import cached_property

from . import wire
from .keys import SigningKey, verify_signature
from .types import CryptoId, Hash, Reference, Signature


# -- field codecs ------------------------------------------------------------

class Codec:
    def enc(self, v) -> bytes:
        raise NotImplementedError

    def dec(self, b: bytes):
        raise NotImplementedError

    def norm(self, v):
        return v

    def match(self, want, got) -> bool:
        return want == got

    def refs(self, v):
        return ()


class _Bytes(Codec):
    def enc(self, v):
        return bytes(v)

    def dec(self, b):
        return b

    def norm(self, v):
        if not isinstance(v, (bytes, bytearray, memoryview)):
            raise TypeError("expected bytes, got %s" % type(v).__name__)
        return bytes(v)


class _Text(Codec):
    def enc(self, v):
        return v.encode("utf-8")

    def dec(self, b):
        try:
            return b.decode("utf-8")
        except UnicodeDecodeError:
            raise wire.DecodeError("text field is not UTF-8") from None

    def norm(self, v):
        if not isinstance(v, str):
            raise TypeError("expected str")
        return v


class _U64(Codec):
    def enc(self, v):
        return wire.u64(v)

    def dec(self, b):
        return wire.read_u64(b)

    def norm(self, v):
        v = int(v)
        if not 0 <= v < 1 << 64:
            raise ValueError("u64 out of range: %d" % v)
        return v


class _U8(Codec):
    def enc(self, v):
        return wire.u8(v)

    def dec(self, b):
        return wire.read_u8(b)

    def norm(self, v):
        v = int(v)
        if not 0 <= v < 256:
            raise ValueError("u8 out of range")
        return v


class _Simple(Codec):
    def __init__(self, cls):
        self.cls = cls

    def enc(self, v):
        return v.encode()

    def dec(self, b):
        return self.cls.decode(b)

    def norm(self, v):
        if not isinstance(v, self.cls):
            raise TypeError("expected %s, got %s" % (self.cls.__name__, type(v).__name__))
        return v


class _Ref(_Simple):
    def __init__(self):
        super().__init__(Reference)

    def match(self, want, got):
        # patterns name the referenced block; bundles are irrelevant
        return want.hash == got.hash

    def refs(self, v):
        return (v,)


class ListOf(Codec):
    def __init__(self, item: Codec):
        self.item = item

    def enc(self, v):
        return b"".join(wire.field(self.item.enc(x)) for x in v)

    def dec(self, b):
        return tuple(self.item.dec(x) for x in wire.split(b))

    def norm(self, v):
        return tuple(self.item.norm(x) for x in v)

    def match(self, want, got):
        return len(want) == len(got) and all(self.item.match(a, b) for a, b in zip(want, got))

    def refs(self, v):
        return tuple(r for x in v for r in self.item.refs(x))


class SetOf(ListOf):
    """Sorted ascending by element encoding, duplicates removed."""

    def norm(self, v):
        items = {}
        for x in v:
            x = self.item.norm(x)
            items[self.item.enc(x)] = x
        return tuple(items[k] for k in sorted(items))

    def match(self, want, got):
        if isinstance(self.item, _Ref):
            return sorted(r.hash for r in want) == sorted(r.hash for r in got)
        return want == got


class PairOf(Codec):
    def __init__(self, a: Codec, b: Codec):
        self.a, self.b = a, b

    def enc(self, v):
        return wire.record([self.a.enc(v[0]), self.b.enc(v[1])])

    def dec(self, b):
        x, y = wire.split_exact(b, 2)
        return (self.a.dec(x), self.b.dec(y))

    def norm(self, v):
        x, y = v
        return (self.a.norm(x), self.b.norm(y))

    def match(self, want, got):
        return self.a.match(want[0], got[0]) and self.b.match(want[1], got[1])

    def refs(self, v):
        return self.a.refs(v[0]) + self.b.refs(v[1])


class Optional(Codec):
    """None or one value; encoded as a list of zero or one elements."""

    def __init__(self, item: Codec):
        self.item = item

    def enc(self, v):
        return b"" if v is None else wire.field(self.item.enc(v))

    def dec(self, b):
        parts = wire.split(b)
        if len(parts) > 1:
            raise wire.DecodeError("optional field holds %d values" % len(parts))
        return self.item.dec(parts[0]) if parts else None

    def norm(self, v):
        return None if v is None else self.item.norm(v)

    def refs(self, v):
        return () if v is None else self.item.refs(v)


BYTES = _Bytes()
TEXT = _Text()
U64 = _U64()
U8 = _U8()
HASH = _Simple(Hash)
CID = _Simple(CryptoId)
SIG = _Simple(Signature)
REF = _Ref()


# -- blocks ------------------------------------------------------------------

REGISTRY: dict[int, type] = {}


def variant(tag: int, **codecs):
    """Class decorator: freeze a dataclass and register its wire tag."""

    def wrap(cls):
        cls = dataclass(frozen=True, eq=False, repr=False)(cls)
        names = [f.name for f in dc_fields(cls)]
        missing = [n for n in names if n not in codecs]
        if missing:
            raise TypeError("no codec for %s.%s" % (cls.__name__, missing))
        cls.TAG = tag
        cls.FIELDS = tuple((n, codecs[n]) for n in names)
        if tag in REGISTRY:
            raise TypeError("duplicate tag %d" % tag)
        REGISTRY[tag] = cls
        return cls

    return wrap


class Block:
    TAG: int = 0
    FIELDS: tuple = ()
    SIGNED: tuple | None = None  # field names covered by the signature
    ISSUER: str = "issuer"

    def __post_init__(self):
        for name, codec in self.FIELDS:
            object.__setattr__(self, name, codec.norm(getattr(self, name)))
        self.check()

    def check(self):
        """Variant-specific invariants; raise ValueError when violated."""

    @cached_property
    def encoded(self) -> bytes:
        return bytes([self.TAG]) + b"".join(
            wire.field(c.enc(getattr(self, n))) for n, c in self.FIELDS)

    @cached_property
    def hash(self) -> Hash:
        return Hash.of(self.encoded)

    def ref(self, availability=(), integrity=()) -> Reference:
        return Reference(self.hash, availability, integrity)

    def embedded_refs(self) -> tuple:
        out = []
        for n, c in self.FIELDS:
            out.extend(c.refs(getattr(self, n)))
        return tuple(out)

    def signing_payload(self) -> bytes:
        parts = [c.enc(getattr(self, n)) for n, c in self.FIELDS if n in self.SIGNED]
        return bytes([self.TAG]) + wire.record(parts)

    @classmethod
    def signed(cls, key: SigningKey, **values):
        """Build a signed instance; the issuer field is taken from ``key``."""
        if cls.SIGNED is None:
            raise TypeError("%s is not a signed variant" % cls.__name__)
        values[cls.ISSUER] = key.id
        parts = [c.enc(c.norm(values[n])) for n, c in cls.FIELDS if n in cls.SIGNED]
        sig = key.sign(bytes([cls.TAG]) + wire.record(parts))
        return cls(signature=sig, **values)

    @cached_property
    def signature_ok(self) -> bool:
        if self.SIGNED is None:
            return True
        sig = getattr(self, "signature")
        if sig.signer != getattr(self, self.ISSUER):
            return False
        return verify_signature(self.signing_payload(), sig)

    @property
    def signer(self) -> CryptoId | None:
        return getattr(self, self.ISSUER) if self.SIGNED is not None else None

    def __eq__(self, other):
        return isinstance(other, Block) and self.encoded == other.encoded

    def __hash__(self):
        return hash(self.hash.digest)

    def __repr__(self):
        return "%s<%s>" % (type(self).__name__, self.hash.short())


@variant(1, payload=BYTES)
class Opaque(Block):
    payload: bytes


@variant(2, text=TEXT)
class TypeDescription(Block):
    text: str


@variant(3, subject=REF, covered=SetOf(HASH), issuer=CID, signature=SIG)
class StoreForever(Block):
    subject: Reference
    covered: tuple
    issuer: CryptoId
    signature: Signature
    SIGNED = ("subject", "covered")

    def check(self):
        if self.subject.availability or self.subject.integrity:
            raise ValueError("store-forever subject must be a bare reference")

    def covers(self) -> set:
        return {self.subject.hash, *self.covered}


@variant(4, block=REF, root=REF, slot=U64, parent=REF, issuer=CID, signature=SIG)
class ChainSlot(Block):
    block: Reference
    root: Reference
    slot: int
    parent: Reference
    issuer: CryptoId
    signature: Signature
    SIGNED = ("block", "root", "slot", "parent")

    def check(self):
        if self.slot < 1:
            raise ValueError("chain slots start at 1")
        if self.slot == 1 and self.parent.hash != self.root.hash:
            raise ValueError("slot 1 must name the root as parent")


@variant(5, time=U64, subjects=ListOf(REF), issuer=CID, signature=SIG)
class TimestampBatch(Block):
    time: int
    subjects: tuple
    issuer: CryptoId
    signature: Signature
    SIGNED = ("time", "subjects")

    def check(self):
        if not self.subjects:
            raise ValueError("timestamp needs at least one subject")


@variant(6, block=REF, parent=REF, nonce=U64)
class NakamotoPoW(Block):
    block: Reference
    parent: Reference
    nonce: int


@variant(7, time=U64, branch_name=TEXT, commit=REF, issuer=CID, signature=SIG)
class GitBranch(Block):
    time: int
    branch_name: str
    commit: Reference
    issuer: CryptoId
    signature: Signature
    SIGNED = ("time", "branch_name", "commit")


ONE_A, ONE_B, TWO_A, TWO_B = 1, 2, 3, 4
PHASE_NAMES = {ONE_A: "1A", ONE_B: "1B", TWO_A: "2A", TWO_B: "2B"}


@variant(8, phase=U8, counter=U64, proposer=CID, proposal=REF,
         justification=SetOf(REF), sender=CID, signature=SIG)
class HetconsMessage(Block):
    phase: int
    counter: int
    proposer: CryptoId
    proposal: Reference
    justification: tuple
    sender: CryptoId
    signature: Signature
    SIGNED = ("phase", "counter", "proposer", "proposal", "justification", "sender")
    ISSUER = "sender"

    def check(self):
        if self.phase not in PHASE_NAMES:
            raise ValueError("unknown phase %d" % self.phase)

    @property
    def ballot(self) -> tuple:
        return (self.counter, self.proposer.public_key)


@variant(9, proposal=REF, quorum_2b=SetOf(REF), issuer=CID, signature=SIG)
class HetconsDecision(Block):
    proposal: Reference
    quorum_2b: tuple
    issuer: CryptoId
    signature: Signature
    SIGNED = ("proposal", "quorum_2b")


@variant(10, comment=TEXT, content_hash=HASH, initial=Optional(BYTES),
         parents=ListOf(PairOf(REF, BYTES)), author=CID, signature=SIG)
class GitCommit(Block):
    comment: str
    content_hash: Hash
    initial: bytes | None
    parents: tuple
    author: CryptoId
    signature: Signature
    SIGNED = ("comment", "content_hash", "initial", "parents", "author")
    ISSUER = "author"

    def check(self):
        if (self.initial is None) == (not self.parents):
            raise ValueError("a commit is initial exactly when it has no parents")


@variant(11, chains=ListOf(PairOf(REF, U64)), block=REF)
class HetconsProposal(Block):
    """A MeetRequest: commit ``block`` at the named slot of every listed chain."""

    chains: tuple
    block: Reference

    def check(self):
        if not self.chains:
            raise ValueError("meet request names no chain")
        roots = [r.hash for r, _ in self.chains]
        if len(set(roots)) != len(roots):
            raise ValueError("meet request names a chain twice")
        if any(s < 1 for _, s in self.chains):
            raise ValueError("chain slots start at 1")

    def keys(self) -> tuple:
        return tuple((r.hash, s) for r, s in self.chains)


@variant(12, participants=SetOf(CID), quorums=SetOf(SetOf(CID)), f=U64)
class QuorumConfig(Block):
    participants: tuple
    quorums: tuple
    f: int

    def check(self):
        part = set(self.participants)
        if not self.quorums:
            raise ValueError("no quorums")
        for q in self.quorums:
            if not set(q) <= part:
                raise ValueError("quorum member outside participant set")
        for i, a in enumerate(self.quorums):
            for b in self.quorums[i:]:
                if len(set(a) & set(b)) < self.f + 1:
                    raise ValueError("quorums intersect in fewer than f+1 participants")

    def is_quorum(self, ids) -> bool:
        ids = set(ids)
        return any(set(q) <= ids for q in self.quorums)

    @classmethod
    def threshold(cls, participants, f: int) -> "QuorumConfig":
        """All subsets of size 2f+1 from 3f+1 participants, given as minimal quorums."""
        from itertools import combinations
        parts = sorted(participants, key=CryptoId.encode)
        if len(parts) != 3 * f + 1:
            raise ValueError("threshold config needs 3f+1 participants")
        quorums = [tuple(c) for c in combinations(parts, 2 * f + 1)]
        return cls(participants=parts, quorums=quorums, f=f)


@variant(13, payload=BYTES, references=ListOf(REF))
class DataBlock(Block):
    """Client payload plus references to earlier blocks (what ``mint`` builds)."""

    payload: bytes
    references: tuple


# -- encode / decode ---------------------------------------------------------

def canonical_encode(block: Block) -> bytes:
    return block.encoded


def hash_block(block: Block) -> Hash:
    return block.hash


def make_ref(block: Block) -> Reference:
    return Reference(block.hash)


def verify_reference(ref: Reference, block: Block) -> bool:
    return Hash.of(block.encoded) == ref.hash


def decode_block(data: bytes) -> Block:
    if not data:
        raise wire.DecodeError("empty block frame")
    cls = REGISTRY.get(data[0])
    if cls is None:
        raise wire.DecodeError("unknown block tag %d" % data[0])
    parts = wire.split_exact(data[1:], len(cls.FIELDS))
    values = {}
    for (name, codec), raw in zip(cls.FIELDS, parts):
        values[name] = codec.dec(raw)
    try:
        blk = cls(**values)
    except (ValueError, TypeError) as e:
        raise wire.DecodeError("%s: %s" % (cls.__name__, e)) from None
    if blk.encoded != data:
        raise wire.DecodeError("non-canonical %s encoding" % cls.__name__)
    return blk


# -- patterns (blocks with blank fields) -------------------------------------

class Pattern:
    """A block variant with only some fields populated.

    Used for fill-in-the-blank queries and for integrity requests, which are
    attestations with the signature (and other server-chosen fields) left
    blank.
    """

    __slots__ = ("cls", "values")

    def __init__(self, cls: type, **values):
        names = {n for n, _ in cls.FIELDS}
        bad = set(values) - names
        if bad:
            raise TypeError("%s has no fields %s" % (cls.__name__, sorted(bad)))
        codecs = dict(cls.FIELDS)
        self.cls = cls
        self.values = {n: codecs[n].norm(v) for n, v in values.items()
                       if v is not wire.BLANK}

    def encode(self) -> bytes:
        out = [bytes([self.cls.TAG])]
        for n, c in self.cls.FIELDS:
            if n in self.values:
                out.append(wire.field(c.enc(self.values[n])))
            else:
                out.append(wire.blank_field())
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "Pattern":
        if not data:
            raise wire.DecodeError("empty pattern frame")
        bcls = REGISTRY.get(data[0])
        if bcls is None:
            raise wire.DecodeError("unknown block tag %d" % data[0])
        parts = wire.split_exact(data[1:], len(bcls.FIELDS), allow_blank=True)
        values = {}
        for (name, codec), raw in zip(bcls.FIELDS, parts):
            if raw is not wire.BLANK:
                values[name] = codec.dec(raw)
        try:
            return cls(bcls, **values)
        except (ValueError, TypeError) as e:
            raise wire.DecodeError(str(e)) from None

    def matches(self, block: Block) -> bool:
        if type(block) is not self.cls:
            return False
        codecs = dict(self.cls.FIELDS)
        return all(codecs[n].match(v, getattr(block, n)) for n, v in self.values.items())

    def get(self, name, default=None):
        return self.values.get(name, default)

    def require(self, *names):
        missing = [n for n in names if n not in self.values]
        if missing:
            raise ValueError("request is missing fields: %s" % ", ".join(missing))

    def __eq__(self, other):
        return isinstance(other, Pattern) and self.encode() == other.encode()

    def __hash__(self):
        return hash(self.encode())

    def __repr__(self):
        return "Pattern(%s, %s)" % (self.cls.__name__, sorted(self.values))
