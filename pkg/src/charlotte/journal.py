"""Append-only record journal used for restartable stores and ledgers.

File layout: a sequence of records, each a 4-byte big-endian length and the
record bytes.  A torn final record (crash mid-write) is ignored on replay and
truncated away before new appends.
"""
from __future__ import annotations

import os
import struct

_LEN = struct.Struct(">I")


class Journal:
    def __init__(self, path, fsync: bool = False):
        self.path = os.fspath(path)
        self.fsync = fsync
        good = 0
        self._records = []
        if os.path.exists(self.path):
            with open(self.path, "rb") as fh:
                data = fh.read()
            pos = 0
            while pos + 4 <= len(data):
                (n,) = _LEN.unpack_from(data, pos)
                if pos + 4 + n > len(data):
                    break
                self._records.append(data[pos + 4:pos + 4 + n])
                pos += 4 + n
            good = pos
            if good != len(data):
                with open(self.path, "r+b") as fh:
                    fh.truncate(good)
        self._fh = open(self.path, "ab")

    def replay(self):
        """Records present when the journal was opened, in write order."""
        recs, self._records = self._records, []
        return recs

    def append(self, record: bytes) -> None:
        self._fh.write(_LEN.pack(len(record)) + record)
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self):
        self._fh.close()
