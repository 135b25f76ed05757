"""Toeplitz-matrix privacy amplification over GF(2).

The ``m x n`` matrix is ``T[i, j] = seed[i - j + n - 1]``, so
``out[i] = sum_j seed[i - j + n - 1] * key[j] (mod 2)``, which is entry
``i + n - 1`` of the full convolution ``seed * key``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ..errors import InvalidParameterError

# below this many multiply-adds a direct convolution is cheaper and exact
_DIRECT_LIMIT = 1 << 22
# float64 FFT rounding error stays far below 0.5 up to this length
_FFT_MAX_N = 1 << 24


@dataclass(frozen=True, eq=False)
class PaParams:
    seed: np.ndarray
    out_len: int

    def __post_init__(self):
        object.__setattr__(self, "seed", np.asarray(self.seed, dtype=np.uint8))
        if self.out_len < 0:
            raise InvalidParameterError("output length must be nonnegative")

    @classmethod
    def random(cls, n: int, m: int, rng: np.random.Generator) -> "PaParams":
        return cls(rng.integers(0, 2, size=max(n + m - 1, 0), dtype=np.uint8), m)


def toeplitz_seed_length(n: int, m: int) -> int:
    return n + m - 1 if m > 0 else 0


def privacy_amplify(key: np.ndarray, pa: PaParams) -> np.ndarray:
    key = np.asarray(key, dtype=np.uint8)
    n, m = key.size, pa.out_len
    if m > n:
        raise InvalidParameterError(f"output length {m} exceeds key length {n}")
    if m == 0:
        return np.zeros(0, dtype=np.uint8)
    if pa.seed.size != n + m - 1:
        raise InvalidParameterError(f"Toeplitz seed must have {n + m - 1} bits, got {pa.seed.size}")
    if n > _FFT_MAX_N:
        raise InvalidParameterError(f"key of {n} bits is too long for the FFT path")
    if n * (n + m) <= _DIRECT_LIMIT:
        full = np.convolve(pa.seed.astype(np.int64), key.astype(np.int64))
    else:
        full = np.rint(fftconvolve(pa.seed.astype(np.float64), key.astype(np.float64))).astype(np.int64)
    return (full[n - 1:n - 1 + m] & 1).astype(np.uint8)
