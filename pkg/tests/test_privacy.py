import itertools

import numpy as np
import pytest

from oneway_qkd.errors import InvalidParameterError
from oneway_qkd.postproc import PaParams, privacy_amplify


def naive_toeplitz(key, seed, m):
    """Build the m x n matrix entry by entry and multiply over GF(2)."""
    n = len(key)
    out = []
    for i in range(m):
        acc = 0
        for j in range(n):
            acc ^= seed[i - j + n - 1] & key[j]
        out.append(acc)
    return out


def bit_vectors(n):
    return [np.array(v, dtype=np.uint8) for v in itertools.product((0, 1), repeat=n)]


def test_empty_output():
    assert privacy_amplify(np.ones(5, np.uint8), PaParams(np.zeros(0, np.uint8), 0)).size == 0


def test_zero_key_maps_to_zero(rng):
    for n, m in [(8, 3), (300, 120)]:
        pa = PaParams.random(n, m, rng)
        assert not privacy_amplify(np.zeros(n, np.uint8), pa).any()


def test_seed_length_checked():
    with pytest.raises(InvalidParameterError):
        privacy_amplify(np.ones(4, np.uint8), PaParams(np.ones(5, np.uint8), 3))
    with pytest.raises(InvalidParameterError):
        privacy_amplify(np.ones(4, np.uint8), PaParams(np.ones(8, np.uint8), 5))


def test_exhaustive_against_naive_oracle():
    checked = 0
    for n in range(1, 7):
        keys = bit_vectors(n)
        for m in range(1, min(n, 4) + 1):
            for seed in bit_vectors(n + m - 1):
                pa = PaParams(seed, m)
                for key in keys:
                    assert list(privacy_amplify(key, pa)) == naive_toeplitz(key, seed, m)
                    checked += 1
    assert checked == 81140


def test_exhaustive_linearity():
    for n in range(1, 7):
        keys = bit_vectors(n)
        for m in range(1, min(n, 4) + 1):
            for seed in bit_vectors(n + m - 1):
                pa = PaParams(seed, m)
                images = {k.tobytes(): privacy_amplify(k, pa) for k in keys}
                for k1 in keys[:: max(1, len(keys) // 8)]:
                    for k2 in keys:
                        assert np.array_equal(images[(k1 ^ k2).tobytes()], images[k1.tobytes()] ^ images[k2.tobytes()])


def test_fft_path_matches_oracle(rng):
    n, m = 3000, 1500  # above the direct-convolution limit
    key = rng.integers(0, 2, n, dtype=np.uint8)
    pa = PaParams.random(n, m, rng)
    fast = privacy_amplify(key, pa)
    T = np.array([[pa.seed[i - j + n - 1] for j in range(n)] for i in range(0, m, 97)], dtype=np.int64)
    assert np.array_equal(fast[::97], (T @ key) % 2)
