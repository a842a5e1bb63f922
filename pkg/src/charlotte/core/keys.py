from __future__ import annotations

import hashlib

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .types import ED25519, CryptoId, Signature


class IdentityError(ValueError):
    """Key material that cannot serve as a signing identity."""


class SigningKey:
    __slots__ = ("_sk", "id")

    def __init__(self, secret: bytes):
        if not isinstance(secret, (bytes, bytearray)) or len(secret) != 32:
            raise IdentityError("Ed25519 secret key must be exactly 32 bytes")
        self._sk = Ed25519PrivateKey.from_private_bytes(bytes(secret))
        pub = self._sk.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        self.id = CryptoId(ED25519, pub)

    @classmethod
    def derive(cls, seed, label: str) -> "SigningKey":
        """Deterministic key for simulations and tests."""
        return cls(hashlib.sha256(("charlotte-key:%s:%s" % (seed, label)).encode()).digest())

    def secret_bytes(self) -> bytes:
        return self._sk.private_bytes(
            serialization.Encoding.Raw, serialization.PrivateFormat.Raw,
            serialization.NoEncryption())

    def sign(self, payload: bytes) -> Signature:
        return Signature(self.id, self._sk.sign(payload))

    def __repr__(self) -> str:
        return "SigningKey(%s)" % self.id.short()


_pubcache: dict = {}


def _public(cid: CryptoId) -> Ed25519PublicKey:
    pk = _pubcache.get(cid.public_key)
    if pk is None:
        try:
            pk = Ed25519PublicKey.from_public_bytes(cid.public_key)
        except ValueError as e:
            raise IdentityError(str(e)) from None
        _pubcache[cid.public_key] = pk
    return pk


def sign(payload: bytes, key: SigningKey) -> Signature:
    if not isinstance(key, SigningKey):
        raise IdentityError("not a signing key: %r" % (key,))
    return key.sign(payload)


def verify_signature(payload: bytes, sig: Signature) -> bool:
    if sig.signer.scheme != ED25519:
        return False
    try:
        _public(sig.signer).verify(sig.sig, payload)
    except (InvalidSignature, IdentityError):
        return False
    return True


def load_key_file(path) -> SigningKey:
    """Key files hold the 32-byte secret as 64 hex characters."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read().strip()
        raw = bytes.fromhex(text)
    except (OSError, ValueError, UnicodeDecodeError) as e:
        raise IdentityError("unusable key file %s: %s" % (path, e)) from None
    return SigningKey(raw)
