"""Length-prefixed frames for the classical channel.

Layout: 4-byte little-endian payload length, 1-byte type tag, payload.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import FramingError, ProtocolError

HEADER = struct.Struct("<IB")
MAX_PAYLOAD = 2**32 - 1


class FrameType(IntEnum):
    HELLO = 0x01
    PARAMS = 0x02
    DETECTIONS = 0x03
    BASIS_REVEAL = 0x04
    SIFT_RESULT = 0x05
    QBER_SAMPLE = 0x06
    QBER_RESULT = 0x07
    SHUFFLE_SEED = 0x08
    PARITIES = 0x09
    PARITY_REPLY = 0x0A
    PA_SEED = 0x0B
    KEY_HASH = 0x0C
    ABORT = 0x0D
    # stand-in for the optical fiber; never carries classical protocol data
    SIM_PULSES = 0x0E


@dataclass(frozen=True)
class Frame:
    type: FrameType
    payload: bytes = b""

    def __post_init__(self):
        object.__setattr__(self, "type", FrameType(self.type))
        object.__setattr__(self, "payload", bytes(self.payload))


def encode_frame(frame: Frame) -> bytes:
    if len(frame.payload) > MAX_PAYLOAD:
        raise FramingError(f"payload of {len(frame.payload)} bytes does not fit a 32-bit length")
    return HEADER.pack(len(frame.payload), int(frame.type)) + frame.payload


def parse_header(header: bytes) -> tuple[int, FrameType]:
    if len(header) < HEADER.size:
        raise FramingError(f"truncated header: {len(header)} of {HEADER.size} bytes")
    length, tag = HEADER.unpack_from(header)
    try:
        return length, FrameType(tag)
    except ValueError:
        raise ProtocolError(f"unknown frame tag 0x{tag:02X}") from None


def decode_frame(buf: bytes) -> Frame:
    length, ftype = parse_header(buf)
    end = HEADER.size + length
    if len(buf) < end:
        raise FramingError(f"truncated payload: expected {length} bytes, got {len(buf) - HEADER.size}")
    if len(buf) > end:
        raise FramingError(f"{len(buf) - end} trailing bytes after frame")
    return Frame(ftype, buf[HEADER.size:end])


# payload helpers -----------------------------------------------------------

def json_payload(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def parse_json(payload: bytes):
    try:
        return json.loads(payload.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed JSON payload: {exc}") from None


def pack_bits(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    return struct.pack("<Q", bits.size) + np.packbits(bits).tobytes()


def unpack_bits(payload: bytes) -> np.ndarray:
    if len(payload) < 8:
        raise ProtocolError("bit payload shorter than its length field")
    (n,) = struct.unpack_from("<Q", payload)
    body = np.frombuffer(payload, dtype=np.uint8, offset=8)
    if body.size != (n + 7) // 8:
        raise ProtocolError(f"bit payload length mismatch: {n} bits in {body.size} bytes")
    return np.unpackbits(body, count=n)


def pack_ints(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<i8").tobytes()


def unpack_ints(payload: bytes) -> np.ndarray:
    if len(payload) % 8:
        raise ProtocolError("integer payload is not a multiple of 8 bytes")
    return np.frombuffer(payload, dtype="<i8").astype(np.int64)
