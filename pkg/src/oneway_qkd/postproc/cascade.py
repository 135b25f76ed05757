"""Cascade information reconciliation over a frame transport.

Alice holds the reference key and only answers parity queries.  Bob holds
the noisy key and drives everything: block parities, binary searches, and
the backtracking step that re-opens blocks of earlier passes after a flip.

Pass ``i`` (0-based) splits the key, after a seeded permutation (identity
for the first pass), into blocks of ``k1 * 2**i`` bits with
``k1 = ceil(k1_coefficient / qber)``.  Every parity bit Alice sends counts
as leaked; parities Bob can deduce (parent XOR left half) are never asked.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import InvalidParameterError, ProtocolError
from ..frames import Frame, FrameType, pack_bits, unpack_bits
from ..transport import Transport, expect, pipe_pair

REQUEST_DTYPE = np.dtype([("pass", "u1"), ("start", "<u4"), ("end", "<u4")])

Range = tuple[int, int, int]  # (pass, start, end) in that pass's permuted order


@dataclass(frozen=True)
class CascadeParams:
    passes: int = 4
    k1_coefficient: float = 0.73
    shuffle_seeds: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.passes < 1:
            raise InvalidParameterError("Cascade needs at least one pass")
        if self.k1_coefficient <= 0:
            raise InvalidParameterError("k1_coefficient must be positive")
        if self.shuffle_seeds is not None and len(self.shuffle_seeds) < self.passes - 1:
            raise InvalidParameterError(f"need {self.passes - 1} shuffle seeds, got {len(self.shuffle_seeds)}")


def first_block_size(qber: float, k1_coefficient: float = 0.73) -> int:
    if not 0.0 < qber < 0.5:
        raise InvalidParameterError(f"Cascade needs a QBER estimate in (0, 0.5), got {qber}")
    return max(1, math.ceil(k1_coefficient / qber))


def pass_permutations(n: int, seeds: Sequence[int], passes: int) -> list[np.ndarray]:
    perms = [np.arange(n, dtype=np.int64)]
    for i in range(1, passes):
        perms.append(np.random.default_rng(int(seeds[i - 1])).permutation(n).astype(np.int64))
    return perms


# --- wire helpers -----------------------------------------------------------

def encode_requests(ranges: Sequence[Range]) -> bytes:
    arr = np.empty(len(ranges), dtype=REQUEST_DTYPE)
    for i, (p, s, e) in enumerate(ranges):
        arr[i] = (p, s, e)
    return arr.tobytes()


def decode_requests(payload: bytes) -> np.ndarray:
    if len(payload) % REQUEST_DTYPE.itemsize:
        raise ProtocolError("PARITIES payload is not a whole number of requests")
    return np.frombuffer(payload, dtype=REQUEST_DTYPE)


# --- Alice: parity oracle ---------------------------------------------------

class ParityServer:
    """Answers block-parity queries on Alice's key; counts what it reveals."""

    def __init__(self, key: np.ndarray, perms: Sequence[np.ndarray]):
        key = np.asarray(key, dtype=np.uint8)
        self._prefix = [np.concatenate(([0], np.cumsum(key[perm], dtype=np.int64))) for perm in perms]
        self.revealed = 0

    def answer(self, requests: np.ndarray) -> np.ndarray:
        p = requests["pass"].astype(np.int64)
        s = requests["start"].astype(np.int64)
        e = requests["end"].astype(np.int64)
        if p.size and (p.max() >= len(self._prefix) or np.any(s >= e) or e.max() >= self._prefix[0].size):
            raise ProtocolError("parity request out of range")
        out = np.empty(p.size, dtype=np.uint8)
        for q in np.unique(p):
            sel = p == q
            pre = self._prefix[q]
            out[sel] = (pre[e[sel]] - pre[s[sel]]) & 1
        self.revealed += int(out.size)
        return out


def cascade_alice(key: np.ndarray, transport: Transport, shuffle_seeds: Sequence[int], passes: int) -> int:
    """Serve parity requests until Bob sends an empty PARITIES frame.

    Returns the number of parity bits revealed.
    """
    server = ParityServer(key, pass_permutations(len(key), shuffle_seeds, passes))
    while True:
        req = decode_requests(expect(transport, FrameType.PARITIES).payload)
        if req.size == 0:
            return server.revealed
        transport.send(Frame(FrameType.PARITY_REPLY, pack_bits(server.answer(req))))


# --- Bob: the Cascade driver -----------------------------------------------

class CascadeDriver:
    def __init__(
        self,
        key: np.ndarray,
        k1: int,
        perms: Sequence[np.ndarray],
        ask: Callable[[list[Range]], np.ndarray],
    ):
        self.key = np.array(key, dtype=np.uint8)
        self.n = self.key.size
        self.perms = list(perms)
        self.inverse = [np.argsort(p) for p in self.perms]
        self.sizes = [k1 * 2**i for i in range(len(self.perms))]
        self._ask = ask
        self.known: dict[Range, int] = {}  # parities Alice revealed
        self.deduced: dict[Range, int] = {}
        self.mismatch: dict[int, np.ndarray] = {}
        self.flips = 0

    @property
    def leaked(self) -> int:
        return len(self.known)

    def _bob_parity(self, r: Range) -> int:
        p, s, e = r
        return int(self.key[self.perms[p][s:e]].sum() & 1)

    def _alice_parities(self, ranges: list[Range]) -> list[int]:
        missing = [r for r in ranges if r not in self.known and r not in self.deduced]
        if missing:
            replies = self._ask(missing)
            if len(replies) != len(missing):
                raise ProtocolError(f"asked {len(missing)} parities, got {len(replies)}")
            for r, bit in zip(missing, replies):
                self.known[r] = int(bit)
        return [self.known[r] if r in self.known else self.deduced[r] for r in ranges]

    def _flip(self, pos: int) -> None:
        self.key[pos] ^= 1
        self.flips += 1
        for q, odd in self.mismatch.items():
            odd[self.inverse[q][pos] // self.sizes[q]] ^= True

    def _bisect(self, blocks: list[Range]) -> None:
        """Locate and flip one error in each block (blocks must be disjoint)."""
        active = list(blocks)
        while active:
            halves = [(p, s, s + (e - s) // 2) for p, s, e in active if e - s > 1]
            alice = iter(self._alice_parities(halves))
            nxt = []
            for p, s, e in active:
                if e - s == 1:
                    self._flip(int(self.perms[p][s]))
                    continue
                mid = s + (e - s) // 2
                a_left = next(alice)
                a_parent = self._alice_parities([(p, s, e)])[0]
                self.deduced.setdefault((p, mid, e), a_parent ^ a_left)
                if a_left != self._bob_parity((p, s, mid)):
                    nxt.append((p, s, mid))
                else:
                    nxt.append((p, mid, e))
            active = nxt

    def _blocks(self, p: int, idx) -> list[Range]:
        size = self.sizes[p]
        return [(p, int(b) * size, min(self.n, (int(b) + 1) * size)) for b in idx]

    def run(self) -> np.ndarray:
        for p in range(len(self.perms)):
            nblocks = -(-self.n // self.sizes[p])
            blocks = self._blocks(p, range(nblocks))
            alice = self._alice_parities(blocks)
            self.mismatch[p] = np.array([a != self._bob_parity(r) for a, r in zip(alice, blocks)], dtype=bool)
            self._bisect(self._blocks(p, np.flatnonzero(self.mismatch[p])))
            # backtrack: re-open odd blocks, smallest pass first
            while True:
                for q in sorted(self.mismatch):
                    odd = np.flatnonzero(self.mismatch[q])
                    if odd.size:
                        self._bisect(self._blocks(q, odd))
                        break
                else:
                    break
        return self.key


def cascade_bob(
    key: np.ndarray,
    qber_est: float,
    transport: Transport,
    shuffle_seeds: Sequence[int],
    passes: int = 4,
    k1_coefficient: float = 0.73,
) -> tuple[np.ndarray, int]:
    n = len(key)

    def ask(ranges: list[Range]) -> np.ndarray:
        transport.send(Frame(FrameType.PARITIES, encode_requests(ranges)))
        return unpack_bits(expect(transport, FrameType.PARITY_REPLY).payload)

    driver = CascadeDriver(
        key,
        first_block_size(qber_est, k1_coefficient),
        pass_permutations(n, shuffle_seeds, passes),
        ask,
    )
    corrected = driver.run() if n else driver.key
    transport.send(Frame(FrameType.PARITIES, b""))
    return corrected, driver.leaked


def cascade_correct(
    key_a: np.ndarray,
    key_b: np.ndarray,
    qber_est: float,
    transport: tuple[Transport, Transport] | None = None,
    params: CascadeParams = CascadeParams(),
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, int]:
    """Run both Cascade roles in-process and return Bob's corrected key.

    ``transport`` is an ``(alice_end, bob_end)`` pair; an in-memory pipe is
    used when omitted.  Alice's side runs on a helper thread.
    """
    key_a = np.asarray(key_a, dtype=np.uint8)
    key_b = np.asarray(key_b, dtype=np.uint8)
    if key_a.shape != key_b.shape:
        raise InvalidParameterError("keys must have equal length")
    first_block_size(qber_est, params.k1_coefficient)  # validates qber_est
    seeds = params.shuffle_seeds
    if seeds is None:
        rng = rng if rng is not None else np.random.default_rng()
        seeds = tuple(int(s) for s in rng.integers(0, 2**63, size=params.passes - 1))
    alice_end, bob_end = transport if transport is not None else pipe_pair()

    failure: list[BaseException] = []

    def serve():
        try:
            cascade_alice(key_a, alice_end, seeds, params.passes)
        except BaseException as exc:  # surfaced in the caller
            failure.append(exc)
            alice_end.close()

    worker = threading.Thread(target=serve, daemon=True)
    worker.start()
    try:
        corrected, leaked = cascade_bob(key_b, qber_est, bob_end, seeds, params.passes, params.k1_coefficient)
    finally:
        worker.join(timeout=30)
    if failure:
        raise failure[0]
    return corrected, leaked
