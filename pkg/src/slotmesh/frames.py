"""Binary wire format for mesh control and data traffic.

Both frame kinds share a fixed six-byte header followed by a neighbor
report list:

    [version:1][type:1][sender:1][slot:1][hop:1][count:1] then count x (id:1, slot:1)

Data frames append routing fields and an opaque payload:

    ... [origin:1][sequence:2][next_hop:1][payload_len:1][payload:payload_len]

All multi-byte integers are big-endian.  Decoding is strict: a buffer is
accepted only if it is byte-exact for its declared shape, which makes
``encode(decode(buf)) == buf`` hold on every accepted buffer.  Worked hex
examples live in FORMAT.md at the repository root.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

PROTOCOL_VERSION = 1
TYPE_BEACON = 0x01
TYPE_DATA = 0x02

MAX_PAYLOAD = 64
MAX_SEQUENCE = 0xFFFF
NEXT_HOP_BROADCAST = 0  # wildcard next_hop used by the broadcast-min policy

# Decode/encode failure codes. Kept as strings so logs and tests stay readable.
TRUNCATED = "truncated"
BAD_VERSION = "bad-version"
BAD_TYPE = "bad-type"
LENGTH_MISMATCH = "length-mismatch"
BAD_FIELD = "bad-field"

_HEADER = struct.Struct(">BBBBBB")
_PAIR = struct.Struct(">BB")
_DATA_FIELDS = struct.Struct(">BHBB")


class FrameError(ValueError):
    """Malformed buffer (decode) or out-of-range field value (encode).

    ``code`` is one of the module-level failure codes and identifies the
    first violated rule.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass
class Beacon:
    """Periodic announcement: who I am, where I transmit, how far from a reference."""

    sender: int
    slot: int
    hop: int
    neighbors: list[tuple[int, int]] = field(default_factory=list)  # (id, slot) pairs


@dataclass
class DataFrame:
    """Application message hop. Carries the full beacon header so receivers
    can run the same synchronization pipeline on overheard data traffic."""

    sender: int
    slot: int
    hop: int
    neighbors: list[tuple[int, int]]
    origin: int
    sequence: int
    next_hop: int
    payload: bytes


def _check_header(sender: int, slot: int, hop: int, neighbors: list[tuple[int, int]]) -> None:
    if not 1 <= sender <= 255:
        raise FrameError(BAD_FIELD, f"sender {sender} outside 1..255")
    if not 1 <= slot <= 255:
        raise FrameError(BAD_FIELD, f"slot {slot} outside 1..255")
    if not 0 <= hop <= 255:
        raise FrameError(BAD_FIELD, f"hop {hop} outside 0..255")
    if len(neighbors) > 255:
        raise FrameError(BAD_FIELD, f"{len(neighbors)} neighbor reports exceed 255")
    for nid, nslot in neighbors:
        if not 1 <= nid <= 255:
            raise FrameError(BAD_FIELD, f"neighbor id {nid} outside 1..255")
        if not 1 <= nslot <= 255:
            raise FrameError(BAD_FIELD, f"neighbor slot {nslot} outside 1..255")


def encode(frame: Beacon | DataFrame) -> bytes:
    """Serialize a frame, rejecting any field the wire format cannot carry."""
    _check_header(frame.sender, frame.slot, frame.hop, frame.neighbors)
    parts = [
        _HEADER.pack(
            PROTOCOL_VERSION,
            TYPE_DATA if isinstance(frame, DataFrame) else TYPE_BEACON,
            frame.sender,
            frame.slot,
            frame.hop,
            len(frame.neighbors),
        )
    ]
    parts += [_PAIR.pack(nid, nslot) for nid, nslot in frame.neighbors]
    if isinstance(frame, DataFrame):
        if not 1 <= frame.origin <= 255:
            raise FrameError(BAD_FIELD, f"origin {frame.origin} outside 1..255")
        if not 0 <= frame.sequence <= MAX_SEQUENCE:
            raise FrameError(BAD_FIELD, f"sequence {frame.sequence} outside 0..{MAX_SEQUENCE}")
        if not 0 <= frame.next_hop <= 255:
            raise FrameError(BAD_FIELD, f"next_hop {frame.next_hop} outside 0..255")
        if frame.next_hop == frame.sender:
            raise FrameError(BAD_FIELD, "next_hop equals sender")
        if len(frame.payload) > MAX_PAYLOAD:
            raise FrameError(BAD_FIELD, f"payload of {len(frame.payload)} bytes exceeds {MAX_PAYLOAD}")
        parts.append(_DATA_FIELDS.pack(frame.origin, frame.sequence, frame.next_hop, len(frame.payload)))
        parts.append(bytes(frame.payload))
    return b"".join(parts)


def decode(buf: bytes) -> Beacon | DataFrame:
    """Parse a buffer into a frame or raise :class:`FrameError`.

    Never raises anything else, regardless of input bytes.
    """
    if len(buf) < 2:
        raise FrameError(TRUNCATED, f"{len(buf)} bytes, need at least 2")
    if buf[0] != PROTOCOL_VERSION:
        raise FrameError(BAD_VERSION, f"version {buf[0]}, expected {PROTOCOL_VERSION}")
    ftype = buf[1]
    if ftype not in (TYPE_BEACON, TYPE_DATA):
        raise FrameError(BAD_TYPE, f"frame type 0x{ftype:02x}")
    if len(buf) < _HEADER.size:
        raise FrameError(TRUNCATED, f"{len(buf)} bytes, header needs {_HEADER.size}")
    _, _, sender, slot, hop, count = _HEADER.unpack_from(buf, 0)
    offset = _HEADER.size
    end_of_neighbors = offset + 2 * count
    if len(buf) < end_of_neighbors:
        raise FrameError(TRUNCATED, f"neighbor list declares {count} entries but buffer ends early")
    neighbors = [_PAIR.unpack_from(buf, offset + 2 * i) for i in range(count)]
    if ftype == TYPE_BEACON:
        if len(buf) != end_of_neighbors:
            raise FrameError(LENGTH_MISMATCH, f"{len(buf) - end_of_neighbors} trailing bytes after beacon")
        frame: Beacon | DataFrame = Beacon(sender, slot, hop, neighbors)
    else:
        offset = end_of_neighbors
        if len(buf) < offset + _DATA_FIELDS.size:
            raise FrameError(TRUNCATED, "buffer ends inside data fields")
        origin, sequence, next_hop, payload_len = _DATA_FIELDS.unpack_from(buf, offset)
        offset += _DATA_FIELDS.size
        if payload_len > MAX_PAYLOAD:
            raise FrameError(BAD_FIELD, f"payload_len {payload_len} exceeds {MAX_PAYLOAD}")
        if len(buf) < offset + payload_len:
            raise FrameError(TRUNCATED, f"payload declares {payload_len} bytes but buffer ends early")
        if len(buf) != offset + payload_len:
            raise FrameError(LENGTH_MISMATCH, f"{len(buf) - offset - payload_len} trailing bytes after payload")
        frame = DataFrame(sender, slot, hop, neighbors, origin, sequence, next_hop, buf[offset:offset + payload_len])
    # Re-run field validation so decode accepts exactly what encode can emit.
    _check_header(sender, slot, hop, neighbors)
    if isinstance(frame, DataFrame):
        if not 1 <= frame.origin <= 255:
            raise FrameError(BAD_FIELD, "origin outside 1..255")
        if frame.next_hop == frame.sender:
            raise FrameError(BAD_FIELD, "next_hop equals sender")
    return frame
