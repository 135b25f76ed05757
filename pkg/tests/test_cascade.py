import math

import numpy as np
import pytest

from oneway_qkd.errors import InvalidParameterError
from oneway_qkd.frames import FrameType, unpack_bits
from oneway_qkd.postproc import CascadeParams, binary_entropy, cascade_correct, first_block_size
from oneway_qkd.transport import TapTransport, pipe_pair

SEEDS = CascadeParams(shuffle_seeds=(11, 12, 13))


def noisy_pair(rng, n, errors):
    a = rng.integers(0, 2, n, dtype=np.uint8)
    b = a.copy()
    b[rng.choice(n, errors, replace=False)] ^= 1
    return a, b


def test_first_block_size():
    assert first_block_size(0.05) == 15
    assert first_block_size(0.1) == 8
    with pytest.raises(InvalidParameterError):
        first_block_size(0.0)
    with pytest.raises(InvalidParameterError):
        first_block_size(0.5)


def test_clean_keys_leak_one_parity_per_block(rng):
    n, k1 = 1024, 15
    a = rng.integers(0, 2, n, dtype=np.uint8)
    out, leaked = cascade_correct(a, a.copy(), 0.05, params=SEEDS)
    blocks = sum(-(-n // (k1 * 2**i)) for i in range(4))
    assert blocks == 69 + 35 + 18 + 9
    assert leaked == blocks
    assert np.array_equal(out, a)


def test_single_error_found_by_binary_search(rng):
    n = 64
    a = rng.integers(0, 2, n, dtype=np.uint8)
    b = a.copy()
    b[21] ^= 1
    out, leaked = cascade_correct(a, b, 0.1, params=SEEDS)
    assert np.array_equal(out, a)
    # 8 blocks + 3 bisection parities in pass 1, then 4 + 2 + 1 clean blocks
    assert leaked == 8 + 3 + 4 + 2 + 1


def test_leak_equals_parity_bits_on_the_wire(rng):
    a, b = noisy_pair(rng, 4096, 246)
    counted = []

    def tap(direction, frame):
        if direction == "send" and frame.type is FrameType.PARITY_REPLY:
            counted.append(unpack_bits(frame.payload).size)

    alice_end, bob_end = pipe_pair()
    out, leaked = cascade_correct(a, b, 0.06, transport=(TapTransport(alice_end, tap), bob_end), params=SEEDS)
    assert leaked == sum(counted)
    assert np.array_equal(out, a)


@pytest.mark.parametrize("q", [0.02, 0.06])
def test_never_increases_mismatches(rng, q):
    for trial in range(10):
        a, b = noisy_pair(rng, 2048, round(q * 2048))
        out, _ = cascade_correct(a, b, q, rng=rng)
        assert np.count_nonzero(out != a) <= np.count_nonzero(b != a)


def test_statistics_at_six_percent():
    n, q = 4096, 0.06
    bound = 1.25 * n * binary_entropy(q)
    residual_free = 0
    for trial in range(100):
        rng = np.random.default_rng([6, trial])
        a, b = noisy_pair(rng, n, round(q * n))
        out, leaked = cascade_correct(a, b, q, rng=rng)
        residual_free += np.array_equal(out, a)
        assert leaked <= bound
    assert residual_free >= 99


def test_estimate_mismatch_is_tolerated(rng):
    # a pessimistic estimate only changes block sizes, never correctness
    a, b = noisy_pair(rng, 4096, 80)
    out, _ = cascade_correct(a, b, 0.08, rng=rng)
    assert np.array_equal(out, a)


def test_unequal_lengths_rejected():
    with pytest.raises(InvalidParameterError):
        cascade_correct(np.zeros(4, np.uint8), np.zeros(5, np.uint8), 0.1)
