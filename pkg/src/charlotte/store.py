"""Insert-only block store with pattern indexes and arrival waiters."""
from __future__ import annotations

import asyncio

from .core import Block, Hash, Pattern, decode_block
from .core.blocks import ListOf, Optional, PairOf, _Ref
from .journal import Journal


def _index_key(codec, value):
    if isinstance(codec, _Ref):
        return value.hash.encode()
    if isinstance(codec, (ListOf, PairOf, Optional)):
        return None
    return codec.enc(value)


class BlockStore:
    def __init__(self, journal: str | None = None):
        self._blocks: dict = {}  # Hash -> Block
        self._order: list = []  # hashes in arrival order
        self._pos: dict = {}  # Hash -> arrival index
        self._by_tag: dict = {}  # tag -> [Hash]
        self._index: dict = {}  # (tag, field, key) -> [Hash]
        self._waiters: dict = {}  # Hash -> [Future]
        self.listeners: list = []  # callables(block), run on first insert
        self._journal = None
        if journal:
            j = Journal(journal)
            for rec in j.replay():
                self._insert(decode_block(rec))
            self._journal = j

    def __len__(self):
        return len(self._blocks)

    def __contains__(self, h) -> bool:
        return (h.hash if isinstance(h, Block) else h) in self._blocks

    def get(self, h: Hash) -> Block | None:
        return self._blocks.get(h)

    def fetch(self, h: Hash) -> Block:
        b = self._blocks.get(h)
        if b is None:
            raise KeyError(h.short())
        return b

    def arrival_index(self, h: Hash) -> int:
        return self._pos[h]

    def all(self) -> list:
        return [self._blocks[h] for h in self._order]

    def add(self, block: Block) -> bool:
        """Store; returns False for a duplicate (which is harmless)."""
        if not isinstance(block, Block):
            raise TypeError("only blocks can be stored")
        if block.hash in self._blocks:
            return False
        if self._journal is not None:
            self._journal.append(block.encoded)
        self._insert(block)
        for fut in self._waiters.pop(block.hash, ()):
            if not fut.done():
                fut.set_result(block)
        for fn in list(self.listeners):
            fn(block)
        return True

    def _insert(self, block):
        h = block.hash
        self._blocks[h] = block
        self._pos[h] = len(self._order)
        self._order.append(h)
        self._by_tag.setdefault(block.TAG, []).append(h)
        for name, codec in block.FIELDS:
            k = _index_key(codec, getattr(block, name))
            if k is not None:
                self._index.setdefault((block.TAG, name, k), []).append(h)

    async def wait_for(self, h: Hash, timeout: float) -> Block | None:
        b = self._blocks.get(h)
        if b is not None or timeout <= 0:
            return b
        fut = asyncio.get_running_loop().create_future()
        self._waiters.setdefault(h, []).append(fut)
        try:
            return await asyncio.wait_for(fut, timeout)
        except asyncio.TimeoutError:
            return None
        finally:
            ws = self._waiters.get(h)
            if ws is not None:
                if fut in ws:
                    ws.remove(fut)
                if not ws:
                    del self._waiters[h]

    async def wait_all(self, hashes, timeout: float) -> list:
        """Wait (jointly bounded by ``timeout``) for every hash; returns the missing ones."""
        missing = [h for h in hashes if h not in self._blocks]
        if missing and timeout > 0:
            loop = asyncio.get_running_loop()
            deadline = loop.time() + timeout
            for h in missing:
                left = deadline - loop.time()
                if left <= 0:
                    break
                await self.wait_for(h, left)
        return [h for h in hashes if h not in self._blocks]

    def of_type(self, cls) -> list:
        return [self._blocks[h] for h in self._by_tag.get(cls.TAG, ())]

    def query(self, pattern: Pattern) -> list:
        """Every stored block agreeing with each populated field, in arrival order."""
        tag = pattern.cls.TAG
        candidates = self._by_tag.get(tag, [])
        codecs = dict(pattern.cls.FIELDS)
        for name, v in pattern.values.items():
            k = _index_key(codecs[name], v)
            if k is not None:
                hit = self._index.get((tag, name, k), [])
                if len(hit) < len(candidates):
                    candidates = hit
        return [self._blocks[h] for h in candidates if pattern.matches(self._blocks[h])]

    def close(self):
        if self._journal is not None:
            self._journal.close()
