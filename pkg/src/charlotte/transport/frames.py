"""Envelope framing and message bodies.

Envelope: kind (1 byte) || correlation (8 bytes, big-endian) || length (4
bytes, big-endian) || payload.  Bodies are records (see core.wire).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from ..core import Hash, Pattern, Reference, decode_block
from ..core import wire

HEADER = struct.Struct(">BQI")
MAX_PAYLOAD = 64 << 20


class Kind(IntEnum):
    SEND_BLOCKS = 1
    REQ_AVAIL = 2
    REQ_INTEGRITY = 3
    WILBUR_QUERY = 4
    RESPONSE = 5


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    kind: Kind
    correlation: int
    payload: bytes

    def encode(self) -> bytes:
        return HEADER.pack(self.kind, self.correlation, len(self.payload)) + self.payload

    @classmethod
    def decode(cls, data: bytes) -> "Envelope":
        if len(data) < HEADER.size:
            raise FrameError("short envelope")
        k, corr, ln = HEADER.unpack_from(data)
        if len(data) - HEADER.size != ln:
            raise FrameError("envelope length mismatch")
        return cls(parse_kind(k), corr, data[HEADER.size:])


def parse_kind(k: int) -> Kind:
    try:
        return Kind(k)
    except ValueError:
        raise FrameError("unknown envelope kind %d" % k) from None


# -- response bodies ---------------------------------------------------------

R_STREAM_ERROR = 1
R_STREAM_DONE = 2
R_RESULT = 3


@dataclass(frozen=True)
class StreamError:
    offset: int
    message: str


@dataclass(frozen=True)
class StreamDone:
    delivered: int
    errors: int


@dataclass(frozen=True)
class Result:
    """Answer to a request: an error, or references plus supporting blocks."""

    error: str = ""
    refs: tuple = ()
    blocks: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.error

    @property
    def ref(self) -> Reference | None:
        return self.refs[0] if self.refs else None


def encode_response(r) -> bytes:
    if isinstance(r, StreamError):
        return bytes([R_STREAM_ERROR]) + wire.record([wire.u64(r.offset), r.message.encode()])
    if isinstance(r, StreamDone):
        return bytes([R_STREAM_DONE]) + wire.record([wire.u64(r.delivered), wire.u64(r.errors)])
    if isinstance(r, Result):
        return bytes([R_RESULT]) + wire.record([
            r.error.encode(),
            b"".join(wire.field(x.encode()) for x in r.refs),
            b"".join(wire.field(b.encoded) for b in r.blocks),
        ])
    raise TypeError(type(r))


def decode_response(data: bytes):
    if not data:
        raise FrameError("empty response")
    t, body = data[0], data[1:]
    if t == R_STREAM_ERROR:
        off, msg = wire.split_exact(body, 2)
        return StreamError(wire.read_u64(off), msg.decode("utf-8", "replace"))
    if t == R_STREAM_DONE:
        a, b = wire.split_exact(body, 2)
        return StreamDone(wire.read_u64(a), wire.read_u64(b))
    if t == R_RESULT:
        err, refs, blocks = wire.split_exact(body, 3)
        return Result(err.decode("utf-8", "replace"),
                      tuple(Reference.decode(x) for x in wire.split(refs)),
                      tuple(decode_block(x) for x in wire.split(blocks)))
    raise FrameError("unknown response type %d" % t)


# -- request bodies ----------------------------------------------------------

@dataclass(frozen=True)
class AvailabilityPolicy:
    subjects: tuple
    cover_referenced_attestations: bool = False
    wait_ms: int = 0

    def __post_init__(self):
        subs = {r.encode(): r for r in self.subjects}
        if not subs:
            raise ValueError("availability policy needs at least one subject")
        object.__setattr__(self, "subjects", tuple(subs[k] for k in sorted(subs)))

    def encode(self) -> bytes:
        return wire.record([
            b"".join(wire.field(r.encode()) for r in self.subjects),
            wire.u8(1 if self.cover_referenced_attestations else 0),
            wire.u64(self.wait_ms),
        ])

    @classmethod
    def decode(cls, data: bytes) -> "AvailabilityPolicy":
        subs, cover, wait = wire.split_exact(data, 3)
        try:
            return cls(tuple(Reference.decode(x) for x in wire.split(subs)),
                       wire.read_u8(cover) == 1, wire.read_u64(wait))
        except ValueError as e:
            raise wire.DecodeError(str(e)) from None


Q_HASH = 1
Q_PATTERN = 2


def encode_query(target, wait_ms: int | None = None) -> bytes:
    if isinstance(target, Hash):
        fields = [target.encode()]
        if wait_ms is not None:
            fields.append(wire.u64(wait_ms))
        return bytes([Q_HASH]) + wire.record(fields)
    if isinstance(target, Pattern):
        return bytes([Q_PATTERN]) + target.encode()
    raise TypeError("query target must be a Hash or Pattern")


def decode_query(data: bytes):
    """Returns (Hash, wait_ms or None) or (Pattern, None)."""
    if not data:
        raise wire.DecodeError("empty query")
    if data[0] == Q_HASH:
        parts = wire.split(data[1:])
        if len(parts) not in (1, 2):
            raise wire.DecodeError("hash query takes 1 or 2 fields")
        wait = wire.read_u64(parts[1]) if len(parts) == 2 else None
        return Hash.decode(parts[0]), wait
    if data[0] == Q_PATTERN:
        return Pattern.decode(data[1:]), None
    raise wire.DecodeError("unknown query type %d" % data[0])
