from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable

from . import wire

SHA3_256 = 1
ED25519 = 1

MAX_REF_DEPTH = 8


@dataclass(frozen=True, order=True)
class Hash:
    algorithm: int
    digest: bytes

    def __post_init__(self):
        if self.algorithm != SHA3_256:
            raise ValueError("unknown hash algorithm %r" % self.algorithm)
        if len(self.digest) != 32:
            raise ValueError("SHA3-256 digest must be 32 bytes")

    @classmethod
    def of(cls, data: bytes) -> "Hash":
        return cls(SHA3_256, hashlib.sha3_256(data).digest())

    def encode(self) -> bytes:
        return bytes([self.algorithm]) + self.digest

    @classmethod
    def decode(cls, b: bytes) -> "Hash":
        if len(b) != 33:
            raise wire.DecodeError("hash field must be 33 bytes, got %d" % len(b))
        try:
            return cls(b[0], b[1:])
        except ValueError as e:
            raise wire.DecodeError(str(e)) from None

    def hex(self) -> str:
        return self.digest.hex()

    def short(self) -> str:
        return self.digest.hex()[:12]

    def __repr__(self) -> str:
        return "Hash(%s)" % self.short()


@dataclass(frozen=True, order=True)
class CryptoId:
    scheme: int
    public_key: bytes

    def __post_init__(self):
        if self.scheme != ED25519:
            raise ValueError("unknown signature scheme %r" % self.scheme)
        if len(self.public_key) != 32:
            raise ValueError("Ed25519 public key must be 32 bytes")

    def encode(self) -> bytes:
        return bytes([self.scheme]) + self.public_key

    @classmethod
    def decode(cls, b: bytes) -> "CryptoId":
        if len(b) != 33:
            raise wire.DecodeError("crypto id field must be 33 bytes")
        try:
            return cls(b[0], b[1:])
        except ValueError as e:
            raise wire.DecodeError(str(e)) from None

    def short(self) -> str:
        return self.public_key.hex()[:8]

    def __repr__(self) -> str:
        return "CryptoId(%s)" % self.short()


@dataclass(frozen=True)
class Signature:
    signer: CryptoId
    sig: bytes

    def __post_init__(self):
        if len(self.sig) != 64:
            raise ValueError("Ed25519 signature must be 64 bytes")

    def encode(self) -> bytes:
        return wire.record([self.signer.encode(), self.sig])

    @classmethod
    def decode(cls, b: bytes) -> "Signature":
        signer, sig = wire.split_exact(b, 2)
        try:
            return cls(CryptoId.decode(signer), sig)
        except ValueError as e:
            raise wire.DecodeError(str(e)) from None


def _sorted_unique(items, key):
    seen = {}
    for it in items:
        seen[key(it)] = it
    return tuple(seen[k] for k in sorted(seen))


class Reference:
    """A pointer to a block plus the attestations bundled with it.

    ``==`` is bundle equality (every field).  ``same_target`` compares only
    the referenced hash, which is what identity means for blocks.
    """

    __slots__ = ("hash", "availability", "integrity", "_enc", "_depth")

    def __init__(self, hash: Hash, availability: Iterable[Hash] = (),
                 integrity: Iterable["Reference"] = ()):
        avail = _sorted_unique(availability, Hash.encode)
        integ = _sorted_unique(integrity, Reference.encode)
        depth = 1 + max(r._depth for r in integ) if integ else 0
        if depth > MAX_REF_DEPTH:
            raise ValueError("reference nesting depth %d exceeds %d" % (depth, MAX_REF_DEPTH))
        object.__setattr__(self, "hash", hash)
        object.__setattr__(self, "availability", avail)
        object.__setattr__(self, "integrity", integ)
        object.__setattr__(self, "_enc", None)
        object.__setattr__(self, "_depth", depth)

    def __setattr__(self, k, v):
        raise AttributeError("Reference is immutable")

    @property
    def depth(self) -> int:
        return self._depth

    def encode(self) -> bytes:
        if self._enc is None:
            enc = wire.record([
                self.hash.encode(),
                b"".join(wire.field(h.encode()) for h in self.availability),
                b"".join(wire.field(r.encode()) for r in self.integrity),
            ])
            object.__setattr__(self, "_enc", enc)
        return self._enc

    @classmethod
    def decode(cls, b: bytes, _depth: int = 0) -> "Reference":
        if _depth > MAX_REF_DEPTH:
            raise wire.DecodeError("reference nesting exceeds %d" % MAX_REF_DEPTH)
        h, av, it = wire.split_exact(b, 3)
        try:
            ref = cls(
                Hash.decode(h),
                [Hash.decode(x) for x in wire.split(av)],
                [cls.decode(x, _depth + 1) for x in wire.split(it)],
            )
        except ValueError as e:
            raise wire.DecodeError(str(e)) from None
        if ref.encode() != b:
            raise wire.DecodeError("non-canonical reference encoding")
        return ref

    def same_target(self, other: "Reference") -> bool:
        return self.hash == other.hash

    def bundle_equal(self, other: "Reference") -> bool:
        return self.encode() == other.encode()

    def with_attestations(self, availability=(), integrity=()) -> "Reference":
        return Reference(self.hash, tuple(self.availability) + tuple(availability),
                         tuple(self.integrity) + tuple(integrity))

    def bare(self) -> "Reference":
        return Reference(self.hash)

    def __eq__(self, other):
        return isinstance(other, Reference) and self.encode() == other.encode()

    def __hash__(self):
        return hash(self.encode())

    def __lt__(self, other: "Reference"):
        return self.encode() < other.encode()

    def __repr__(self) -> str:
        return "Reference(%s, avail=%d, integ=%d)" % (
            self.hash.short(), len(self.availability), len(self.integrity))

    def __reduce__(self):
        return (Reference, (self.hash, self.availability, self.integrity))
