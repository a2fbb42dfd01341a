"""Bit-exact wire frames exchanged between plant and controller processes.

Layout (all multi-byte fields big-endian):

    magic   2 bytes   0x47 0x4C
    version 1 byte    0x01
    type    1 byte    READ_REQ / READ_RESP / WRITE_REQ / WRITE_ACK / TIME_SYNC / ERROR
    seq     u16
    addr    u16
    count   u8        number of payload values
    payload count x 8 bytes, IEEE-754 binary64
    crc     u16       CRC-16/CCITT-FALSE over version..payload

READ_REQ addresses a 16-register block (addr 0 or 16) and carries no payload;
the response returns the whole block. WRITE_REQ writes `count` consecutive
registers starting at addr. Any frame error on the receiving side counts as
a dropped message; there is no retransmission.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

MAGIC = b"\x47\x4c"
VERSION = 0x01
HEADER_LEN = 9
CRC_LEN = 2
MIN_FRAME_LEN = HEADER_LEN + CRC_LEN
MAX_PAYLOAD_COUNT = 255


class FrameType(IntEnum):
    READ_REQ = 0x01
    READ_RESP = 0x02
    WRITE_REQ = 0x03
    WRITE_ACK = 0x04
    TIME_SYNC = 0x05
    ERROR = 0x7F


_VALID_TYPES = {int(t) for t in FrameType}
_ZERO_COUNT_TYPES = {FrameType.READ_REQ, FrameType.WRITE_ACK}


class FrameError(Exception):
    """Base for all decode failures; decoding never raises anything else."""


class BadMagic(FrameError):
    pass


class BadVersion(FrameError):
    pass


class BadLength(FrameError):
    pass


class BadCrc(FrameError):
    pass


class UnknownType(FrameError):
    pass


class PayloadTooLarge(ValueError):
    pass


def crc16_ccitt_false(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, xorout 0."""
    crc = 0xFFFF
    for b in data:
        crc ^= b << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


@dataclass
class Frame:
    ftype: FrameType
    seq: int
    addr: int
    values: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.ftype = FrameType(self.ftype)
        self.values = tuple(float(v) for v in self.values)


def encode_frame(frame: Frame) -> bytes:
    count = len(frame.values)
    if count > MAX_PAYLOAD_COUNT:
        raise PayloadTooLarge(f"payload count {count} exceeds {MAX_PAYLOAD_COUNT}")
    if frame.ftype in _ZERO_COUNT_TYPES and count != 0:
        raise ValueError(f"{frame.ftype.name} frames carry no payload")
    if not 0 <= frame.seq <= 0xFFFF:
        raise ValueError(f"seq {frame.seq} out of u16 range")
    if not 0 <= frame.addr <= 0xFFFF:
        raise ValueError(f"addr {frame.addr} out of u16 range")
    body = struct.pack(">BBHHB", VERSION, int(frame.ftype), frame.seq, frame.addr, count)
    body += struct.pack(f">{count}d", *frame.values)
    crc = crc16_ccitt_false(body)
    return MAGIC + body + struct.pack(">H", crc)


def decode_frame(buf: bytes) -> Frame:
    if len(buf) < MIN_FRAME_LEN:
        raise BadLength(f"buffer of {len(buf)} bytes is shorter than a minimal frame")
    if buf[:2] != MAGIC:
        raise BadMagic(f"bad magic {buf[:2].hex()}")
    count = buf[8]
    expected = MIN_FRAME_LEN + 8 * count
    if len(buf) != expected:
        raise BadLength(f"length {len(buf)} does not match count={count} (expected {expected})")
    crc_got = struct.unpack(">H", buf[-2:])[0]
    crc_want = crc16_ccitt_false(buf[2:-2])
    if crc_got != crc_want:
        raise BadCrc(f"crc {crc_got:#06x} != {crc_want:#06x}")
    version, ftype, seq, addr, _ = struct.unpack(">BBHHB", buf[2:9])
    if version != VERSION:
        raise BadVersion(f"version {version:#04x}")
    if ftype not in _VALID_TYPES:
        raise UnknownType(f"type {ftype:#04x}")
    if ftype in _ZERO_COUNT_TYPES and count != 0:
        raise BadLength(f"type {FrameType(ftype).name} must have count=0, got {count}")
    values = struct.unpack(f">{count}d", buf[9:9 + 8 * count])
    return Frame(FrameType(ftype), seq, addr, values)
