"""Byte-exact frame format for the TCP transport.

Every frame, network byte order::

    | u32 len | u8 type | u64 session | u64 round | u8 party | payload |

``len`` counts the bytes after the length field (type through payload), so a
frame occupies ``4 + len`` bytes on the wire.  Payloads by type:

    HELLO    (1)  empty
    COMMIT   (2)  32-byte SHA-256 digest (see ``transport.base.commitment``)
    REVEAL   (3)  u8 bit, then the 16-byte salt
    ANNOUNCE (4)  u8 bit
    ABORT    (5)  u8 reason code
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .base import SALT_BYTES

__all__ = ["FrameType", "AbortReason", "Frame", "encode_frame", "decode_body", "read_frame", "MAX_FRAME"]

_LEN = struct.Struct(">I")
_HEAD = struct.Struct(">BQQB")
MAX_FRAME = 1 << 16
DIGEST_BYTES = 32


class FrameType(enum.IntEnum):
    HELLO = 1
    COMMIT = 2
    REVEAL = 3
    ANNOUNCE = 4
    ABORT = 5


class AbortReason(enum.IntEnum):
    COMMITMENT_MISMATCH = 1
    TIMEOUT = 2
    KEYS_DEPLETED = 3
    PROTOCOL_ERROR = 4


_PAYLOAD_SIZE = {
    FrameType.HELLO: 0,
    FrameType.COMMIT: DIGEST_BYTES,
    FrameType.REVEAL: 1 + SALT_BYTES,
    FrameType.ANNOUNCE: 1,
    FrameType.ABORT: 1,
}


@dataclass(frozen=True)
class Frame:
    type: FrameType
    session: int
    round: int
    party: int
    payload: bytes = b""

    @property
    def bit(self) -> int:
        if self.type not in (FrameType.REVEAL, FrameType.ANNOUNCE):
            raise AttributeError(f"{self.type.name} frames carry no bit")
        return self.payload[0]

    @property
    def salt(self) -> bytes:
        if self.type is not FrameType.REVEAL:
            raise AttributeError("only REVEAL frames carry a salt")
        return self.payload[1:]

    @property
    def reason(self) -> int:
        return self.payload[0]


def encode_frame(frame: Frame) -> bytes:
    want = _PAYLOAD_SIZE[frame.type]
    if len(frame.payload) != want:
        raise ValueError(f"{frame.type.name} payload must be {want} bytes, got {len(frame.payload)}")
    if frame.type in (FrameType.REVEAL, FrameType.ANNOUNCE) and frame.payload[0] > 1:
        raise ValueError("bit field must be 0 or 1")
    body = _HEAD.pack(frame.type, frame.session, frame.round, frame.party) + frame.payload
    return _LEN.pack(len(body)) + body


def decode_body(body: bytes) -> Frame:
    if len(body) < _HEAD.size:
        raise ValueError("frame shorter than its header")
    t, session, rnd, party = _HEAD.unpack_from(body)
    try:
        ftype = FrameType(t)
    except ValueError:
        raise ValueError(f"unknown frame type {t}") from None
    payload = body[_HEAD.size :]
    if len(payload) != _PAYLOAD_SIZE[ftype]:
        raise ValueError(f"{ftype.name} payload has {len(payload)} bytes")
    if ftype in (FrameType.REVEAL, FrameType.ANNOUNCE) and payload[0] > 1:
        raise ValueError("bit field must be 0 or 1")
    return Frame(ftype, session, rnd, party, bytes(payload))


def _recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed the connection")
        buf += chunk
    return bytes(buf)


def read_frame(sock) -> Frame:
    (length,) = _LEN.unpack(_recv_exact(sock, _LEN.size))
    if length > MAX_FRAME:
        raise ValueError(f"frame length {length} exceeds limit")
    return decode_body(_recv_exact(sock, length))
