"""Length-prefixed framing primitives shared by every canonical encoding.

A record is a sequence of fields, each written as a 4-byte big-endian
length followed by that many bytes.  The reserved length 0xFFFFFFFF marks a
blank field (no bytes follow); blanks are only legal in patterns and
requests, never inside a complete block.
"""
from __future__ import annotations

import struct

BLANK_LEN = 0xFFFFFFFF
MAX_FIELD = BLANK_LEN - 1

_LEN = struct.Struct(">I")
_U64 = struct.Struct(">Q")


class DecodeError(ValueError):
    pass


class Blank:
    """Sentinel for an unpopulated field."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "BLANK"


BLANK = Blank()


def field(data: bytes) -> bytes:
    if len(data) > MAX_FIELD:
        raise ValueError("field too large")
    return _LEN.pack(len(data)) + data


def blank_field() -> bytes:
    return _LEN.pack(BLANK_LEN)


def record(parts) -> bytes:
    return b"".join(field(p) for p in parts)


def split(data: bytes, allow_blank: bool = False) -> list:
    """Split a record into its fields.  Blank fields come back as BLANK."""
    out = []
    pos = 0
    n = len(data)
    mv = memoryview(data)
    while pos < n:
        if pos + 4 > n:
            raise DecodeError("truncated length prefix at byte %d" % pos)
        (ln,) = _LEN.unpack_from(mv, pos)
        pos += 4
        if ln == BLANK_LEN:
            if not allow_blank:
                raise DecodeError("blank field in complete record")
            out.append(BLANK)
            continue
        if pos + ln > n:
            raise DecodeError("field overruns record (need %d, have %d)" % (ln, n - pos))
        out.append(bytes(mv[pos:pos + ln]))
        pos += ln
    return out


def split_exact(data: bytes, count: int, allow_blank: bool = False) -> list:
    parts = split(data, allow_blank)
    if len(parts) != count:
        raise DecodeError("expected %d fields, found %d" % (count, len(parts)))
    return parts


def u64(v: int) -> bytes:
    return _U64.pack(v)


def read_u64(b: bytes) -> int:
    if len(b) != 8:
        raise DecodeError("u64 field must be 8 bytes, got %d" % len(b))
    return _U64.unpack(b)[0]


def u8(v: int) -> bytes:
    return bytes([v])


def read_u8(b: bytes) -> int:
    if len(b) != 1:
        raise DecodeError("u8 field must be 1 byte")
    return b[0]
