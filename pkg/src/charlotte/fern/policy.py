"""Evidence requirements shared by the Ferns that gate on attestations."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..core import StoreForever


class EvidenceError(LookupError):
    """A check needed a block that is not available."""


@dataclass(frozen=True)
class Requirement:
    """At least ``count`` attestations from distinct issuers in ``issuers``
    (an empty issuer set accepts anyone)."""

    count: int = 0
    issuers: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("requirement count must be >= 0")
        object.__setattr__(self, "issuers", frozenset(self.issuers))

    def accepts(self, cid) -> bool:
        return not self.issuers or cid in self.issuers


async def fetch_all(store, hashes, wait: float) -> list:
    await store.wait_all(list(hashes), wait)
    return [b for b in (store.get(h) for h in hashes) if b is not None]


async def availability_shortfall(store, ref, req: Requirement, wait: float = 0.0) -> str | None:
    """None if ``ref``'s bundled availability attestations meet ``req``."""
    if req.count == 0:
        return None
    ok = set()
    for att in await fetch_all(store, ref.availability, wait):
        if (isinstance(att, StoreForever) and att.signature_ok and req.accepts(att.issuer)
                and ref.hash in att.covers()):
            ok.add(att.issuer)
    if len(ok) < req.count:
        return "block %s has %d of %d required availability attestations" % (
            ref.hash.short(), len(ok), req.count)
    return None
