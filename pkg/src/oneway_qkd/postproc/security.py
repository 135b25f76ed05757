"""Entropy, secret fraction and final key length for the single-photon model.

The privacy-amplification cost is ``tau(q) = log2(1 + 4q - 4q^2)`` (individual
attacks on single photons); error correction costs ``h(q)`` per bit at the
Shannon limit.  The secret fraction reaches zero at q ~= 0.1138.
"""
from __future__ import annotations

import math

from scipy.optimize import brentq

from ..errors import InvalidParameterError


def binary_entropy(q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise InvalidParameterError(f"probability must lie in [0, 1], got {q}")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def pa_cost(q: float) -> float:
    """Fraction of the key removed by privacy amplification."""
    return math.log2(1.0 + 4.0 * q - 4.0 * q * q)


def secret_fraction(q: float, ec_efficiency: float = 1.0) -> float:
    if not 0.0 <= q < 0.5:
        raise InvalidParameterError(f"QBER must lie in [0, 0.5), got {q}")
    return max(0.0, 1.0 - pa_cost(q) - ec_efficiency * binary_entropy(q))


def security_limit(ec_efficiency: float = 1.0) -> float:
    """QBER at which :func:`secret_fraction` first reaches zero."""
    return brentq(lambda q: 1.0 - pa_cost(q) - ec_efficiency * binary_entropy(q), 1e-9, 0.5 - 1e-12, xtol=1e-15)


def final_key_length(n_sift_remaining: int, qber: float, leaked_ec: int, safety_bits: int = 30) -> int:
    if n_sift_remaining < 0 or leaked_ec < 0 or safety_bits < 0:
        raise InvalidParameterError("key length, leakage and safety margin must be nonnegative")
    if not 0.0 <= qber <= 0.5:
        raise InvalidParameterError(f"QBER must lie in [0, 0.5], got {qber}")
    m = math.floor(n_sift_remaining * (1.0 - pa_cost(qber)) - leaked_ec - safety_bits)
    return max(0, m)
