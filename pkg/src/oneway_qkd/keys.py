"""Bit buffers exchanged between the protocol layers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True, eq=False)
class SiftedKey:
    """Key bits together with the clock index each bit came from."""

    bits: np.ndarray
    clock_indices: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        idx = np.asarray(self.clock_indices, dtype=np.int64)
        if bits.ndim != 1 or idx.ndim != 1 or bits.shape != idx.shape:
            raise InvalidParameterError("bits and clock_indices must be 1-D and of equal length")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise InvalidParameterError("clock indices must be strictly increasing")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "clock_indices", idx)

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SiftedKey):
            return NotImplemented
        return np.array_equal(self.bits, other.bits) and np.array_equal(self.clock_indices, other.clock_indices)

    def select(self, mask: np.ndarray) -> "SiftedKey":
        return SiftedKey(self.bits[mask], self.clock_indices[mask])

    @classmethod
    def empty(cls) -> "SiftedKey":
        return cls(np.zeros(0, dtype=np.uint8), np.zeros(0, dtype=np.int64))


def fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def key_hash(bits: np.ndarray) -> int:
    """FNV-1a over the bit count (8 bytes LE) followed by the MSB-first packed bits."""
    bits = np.asarray(bits, dtype=np.uint8)
    return fnv1a_64(int(bits.size).to_bytes(8, "little") + np.packbits(bits).tobytes())


def bits_to_hex(bits: np.ndarray) -> str:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()
