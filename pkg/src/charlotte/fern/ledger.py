"""Durable key/value ledgers.  Entries are journaled before they are visible,
so a restarted Fern replays every promise it made."""
from __future__ import annotations

from ..core import wire
from ..journal import Journal


class Ledger:
    def __init__(self, path: str | None = None):
        self._map: dict = {}
        self._journal = None
        if path:
            j = Journal(path)
            for rec in j.replay():
                k, v = wire.split_exact(rec, 2)
                self._map[k] = v
            self._journal = j

    def __len__(self):
        return len(self._map)

    def __contains__(self, key: bytes) -> bool:
        return key in self._map

    def get(self, key: bytes, default=None):
        return self._map.get(key, default)

    def items(self):
        return list(self._map.items())

    def put(self, key: bytes, value: bytes) -> None:
        if self._journal is not None:
            self._journal.append(wire.record([key, value]))
        self._map[key] = value

    def put_once(self, key: bytes, value: bytes) -> bytes | None:
        """Write-once check-and-set.  Returns the existing value if the key is
        already bound (whether or not it equals ``value``), else None."""
        cur = self._map.get(key)
        if cur is not None:
            return cur
        self.put(key, value)
        return None

    def close(self):
        if self._journal is not None:
            self._journal.close()
