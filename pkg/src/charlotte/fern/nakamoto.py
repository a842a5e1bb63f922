"""Proof-of-work chains.

Miners hash for real (SHA3-256 over the canonical NakamotoPoW encoding) and
charge virtual time at a configured hash rate, so a simulated miner with a
rate of R hashes/s finds a block after attempts/R seconds.
"""
from __future__ import annotations

import asyncio
import hashlib
from dataclasses import dataclass, field

from ..core import NakamotoPoW, Opaque, Reference, wire
from ..node import Service
from ..transport import Result
from .policy import Requirement, availability_shortfall

DEFAULT_HASH_RATE = 16384.0
_NONCE_LEN = wire.field(b"\0" * 8)[:4]


def leading_zero_bits(digest: bytes) -> int:
    v = int.from_bytes(digest, "big")
    return len(digest) * 8 - v.bit_length()


def pow_ok(att: NakamotoPoW, difficulty_bits: int) -> bool:
    return leading_zero_bits(att.hash.digest) >= difficulty_bits


def _prefix(block: Reference, parent: Reference) -> bytes:
    # NakamotoPoW encoding is tag, block, parent, nonce; only the last 8 bytes vary
    return (bytes([NakamotoPoW.TAG]) + wire.field(block.encode())
            + wire.field(parent.encode()) + _NONCE_LEN)


def search(block: Reference, parent: Reference, difficulty_bits: int,
           start: int = 0, limit: int | None = None):
    """Try nonces start, start+1, ...; returns (nonce or None, attempts)."""
    base = hashlib.sha3_256(_prefix(block, parent))
    need = 256 - difficulty_bits  # digest value must be below 2**need
    bound = 1 << need
    n = start
    stop = None if limit is None else start + limit
    while stop is None or n < stop:
        h = base.copy()
        h.update(n.to_bytes(8, "big"))
        if int.from_bytes(h.digest(), "big") < bound:
            return n, n - start + 1
        n += 1
    return None, limit


def mine(block: Reference, parent: Reference, difficulty_bits: int, start: int = 0):
    """Returns (attestation, attempts)."""
    if not 0 <= difficulty_bits <= 64:
        raise ValueError("difficulty must be within [0, 64]")
    nonce, attempts = search(block, parent, difficulty_bits, start)
    return NakamotoPoW(block=block, parent=parent, nonce=nonce), attempts


def best_chain(blocks, root_hash, difficulty_bits: int) -> list:
    """Longest valid path from the root; equal lengths go to the smallest tip hash."""
    children: dict = {}
    for b in blocks:
        if isinstance(b, NakamotoPoW) and pow_ok(b, difficulty_bits):
            children.setdefault(b.parent.hash, []).append(b)
    best = (0, b"")
    tip = None
    height = {root_hash: 0}
    stack = [root_hash]
    parent_of = {}
    while stack:
        h = stack.pop()
        for c in children.get(h, ()):
            if c.hash in height:
                continue
            height[c.hash] = height[h] + 1
            parent_of[c.hash] = h
            stack.append(c.hash)
            key = (height[c.hash], c.hash.digest)
            if key[0] > best[0] or (key[0] == best[0] and key[1] < best[1]):
                best, tip = key, c
    if tip is None:
        return []
    by_hash = {b.hash: b for b in blocks if isinstance(b, NakamotoPoW)}
    out = []
    h = tip.hash
    while h != root_hash:
        out.append(by_hash[h])
        h = parent_of[h]
    return out[::-1]


@dataclass
class PowChainConfig:
    root: Reference
    difficulty_bits: int = 12
    k: int = 1
    required_availability: Requirement = field(default_factory=Requirement)
    hash_rate: float = DEFAULT_HASH_RATE  # per miner, hashes per (virtual) second
    chunk: int = 2048

    def __post_init__(self):
        if not 0 <= self.difficulty_bits <= 64:
            raise ValueError("difficulty must be within [0, 64]")
        if self.k < 1:
            raise ValueError("k must be >= 1")


class NakamotoFern(Service):
    integrity_types = (NakamotoPoW,)

    def __init__(self, config: PowChainConfig, peers=(), index: int = 0):
        self.config = config
        self.peers = list(peers)
        self.index = index
        root = config.root.hash
        self.height = {root: 0}
        self.atts: dict = {}
        self.tip = root
        self.orphans: dict = {}
        self.pending: list = []  # block refs waiting to be mined
        self.waiters: list = []  # (block hash, future)
        self.hashes = 0
        self.mined: list = []
        self._fillers = 0
        self._wake = None
        self._interrupt = None
        self._task = None

    # -- chain state ---------------------------------------------------------

    def chain(self) -> list:
        """Best chain known here, root excluded, oldest first."""
        out = []
        h = self.tip
        while h != self.config.root.hash:
            a = self.atts[h]
            out.append(a)
            h = a.parent.hash
        return out[::-1]

    def on_block(self, block, sender, new):
        if new and isinstance(block, NakamotoPoW):
            self._adopt(block)

    def _adopt(self, att):
        if att.hash in self.height or not pow_ok(att, self.config.difficulty_bits):
            return
        ph = att.parent.hash
        if ph not in self.height:
            self.orphans.setdefault(ph, []).append(att)
            return
        todo = [att]
        changed = False
        while todo:
            a = todo.pop()
            if a.hash in self.height:
                continue
            self.height[a.hash] = self.height[a.parent.hash] + 1
            self.atts[a.hash] = a
            # first received wins ties
            if self.height[a.hash] > self.height[self.tip]:
                self.tip = a.hash
                changed = True
            todo.extend(self.orphans.pop(a.hash, ()))
        if changed:
            if self._interrupt is not None and not self._interrupt.done():
                self._interrupt.set_result(None)
            self._check_waiters()
            self._poke()

    def _check_waiters(self):
        if not self.waiters:
            return
        chain = self.chain()
        pos = {a.block.hash: i for i, a in enumerate(chain)}
        keep = []
        for bh, fut in self.waiters:
            i = pos.get(bh)
            if fut.done():
                continue
            if i is not None and len(chain) - i >= self.config.k:
                fut.set_result(tuple(chain[i:i + self.config.k]))
            else:
                keep.append((bh, fut))
        self.waiters = keep

    # -- requests ------------------------------------------------------------

    async def on_integrity(self, req, sender) -> Result:
        req.require("block")
        ref = req.get("block")
        err = await availability_shortfall(self.node.store, ref, self.config.required_availability)
        if err:
            return Result(error="policy: " + err)
        fut = asyncio.get_running_loop().create_future()
        self.waiters.append((ref.hash, fut))
        if all(r.hash != ref.hash for r in self.pending):
            self.pending.append(ref)
        self._check_waiters()
        self._start()
        self._poke()
        atts = await fut
        return Result(refs=(atts[0].ref(),), blocks=atts)

    # -- mining --------------------------------------------------------------

    def _start(self):
        if self._task is None:
            self._wake = asyncio.Event()
            self._task = self.node.spawn(self._mine_loop())

    def _poke(self):
        if self._wake is not None:
            self._wake.set()

    def _next_target(self):
        on_chain = {a.block.hash for a in self.chain()}
        self.pending = [r for r in self.pending if r.hash not in on_chain]
        if self.pending:
            return self.pending[0]
        if any(not f.done() for _, f in self.waiters):
            self._fillers += 1
            filler = Opaque(b"filler:%d:%d" % (self.index, self._fillers))
            self.node.accept_local(filler)
            return filler.ref()
        return None

    async def _mine_loop(self):
        cfg = self.config
        while True:
            target = self._next_target()
            if target is None:
                self._wake.clear()
                await self._wake.wait()
                continue
            parent_hash = self.tip
            parent = (cfg.root if parent_hash == cfg.root.hash
                      else self.atts[parent_hash].ref())
            att = await self._search(target, parent)
            if att is None or self.tip != parent_hash:
                continue
            self.mined.append(att)
            self.node.accept_local(att)
            self.node.broadcast(self.peers, [att])

    async def _search(self, target, parent):
        cfg = self.config
        loop = asyncio.get_running_loop()
        self._interrupt = loop.create_future()
        nonce = self.index << 48
        while True:
            found, attempts = search(target, parent, cfg.difficulty_bits, nonce, cfg.chunk)
            self.hashes += attempts
            done, _ = await asyncio.wait([self._interrupt], timeout=attempts / cfg.hash_rate)
            if done:
                return None
            if found is not None:
                return NakamotoPoW(block=target, parent=parent, nonce=found)
            nonce += attempts
