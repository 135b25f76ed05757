"""QBER estimation by disclosing a random sample of the sifted key."""
from __future__ import annotations

import math

import numpy as np

from ..errors import InsufficientDataError, InvalidParameterError
from ..keys import SiftedKey

MIN_SAMPLE = 4000


def default_sample_size(n: int) -> int:
    """At least 4000 bits, or 10 % of the key when that is larger."""
    return max(MIN_SAMPLE, math.ceil(0.1 * n))


def sample_positions(n: int, sample_size: int, rng: np.random.Generator) -> np.ndarray:
    if sample_size < 1:
        raise InvalidParameterError(f"sample size must be positive, got {sample_size}")
    if sample_size > n:
        raise InsufficientDataError(f"cannot sample {sample_size} bits from a key of {n}")
    return np.sort(rng.choice(n, size=sample_size, replace=False))


def estimate_qber(
    key_a: SiftedKey,
    key_b: SiftedKey,
    sample_size: int | None,
    rng: np.random.Generator,
) -> tuple[float, SiftedKey, SiftedKey]:
    """Compare a random subset of positions, then burn it from both keys."""
    if len(key_a) != len(key_b) or not np.array_equal(key_a.clock_indices, key_b.clock_indices):
        raise InvalidParameterError("keys must cover the same clock indices")
    n = len(key_a)
    if sample_size is None:
        sample_size = default_sample_size(n)
    pos = sample_positions(n, sample_size, rng)
    errors = int(np.count_nonzero(key_a.bits[pos] != key_b.bits[pos]))
    keep = np.ones(n, dtype=bool)
    keep[pos] = False
    return errors / sample_size, key_a.select(keep), key_b.select(keep)
