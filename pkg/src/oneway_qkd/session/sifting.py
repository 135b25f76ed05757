"""BB84 and SARG04 sifting for the phase-encoded double pulse.

Phases are in quarter-turns: Alice sends ``2*b1 + b2``, Bob applies ``b3``.
Port 0 is the constructive output (relative phase 0) and maps to bit 0.

BB84: ``b2`` and ``b3`` are announced; keep when they agree.  Alice's bit is
``b1``, Bob's is the port.

SARG04: ``b1`` and the port are announced instead.  Given ``b1`` the state
is one of ``2*b1`` or ``2*b1 + 1``; Bob's outcome ``b3 + 2*port`` rules out
the candidate lying exactly opposite it.  Keep when exactly one candidate is
ruled out; both parties' bit is ``b2`` (Bob infers it from the survivor).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ..errors import ProtocolError
from ..keys import SiftedKey
from ..optics import Slot


@dataclass(frozen=True)
class AliceRecord:
    clock_index: int
    b1: int
    b2: int


@dataclass(frozen=True)
class BobRecord:
    clock_index: int
    b3: int
    port: int
    slot: Slot = Slot.MIDDLE


def bb84_keep(b2: np.ndarray, b3: np.ndarray) -> np.ndarray:
    return np.asarray(b2) == np.asarray(b3)


def sarg04_decide(b1: np.ndarray, b3: np.ndarray, port: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(keep, bob_bit)`` for each announced (b1, port) with Bob's b3."""
    b1 = np.asarray(b1, dtype=np.int64)
    outcome = np.asarray(b3, dtype=np.int64) + 2 * np.asarray(port, dtype=np.int64)
    excluded0 = (2 * b1 - outcome) % 4 == 2
    excluded1 = (2 * b1 + 1 - outcome) % 4 == 2
    keep = excluded0 ^ excluded1
    return keep, excluded0.astype(np.uint8)


def _align(alice: Iterable[AliceRecord], bob: Iterable[Optional[BobRecord]]):
    by_clock = {}
    for rec in alice:
        if rec.clock_index in by_clock:
            raise ProtocolError(f"duplicate Alice record for clock {rec.clock_index}")
        by_clock[rec.clock_index] = rec
    rows = []
    seen = set()
    for rec in bob:
        if rec is None or rec.slot != Slot.MIDDLE:
            continue
        if rec.clock_index in seen:
            raise ProtocolError(f"duplicate Bob record for clock {rec.clock_index}")
        seen.add(rec.clock_index)
        a = by_clock.get(rec.clock_index)
        if a is None:
            raise ProtocolError(f"Bob reports clock {rec.clock_index} that Alice never sent")
        rows.append((rec.clock_index, a.b1, a.b2, rec.b3, rec.port))
    rows.sort()
    arr = np.array(rows, dtype=np.int64).reshape(-1, 5)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4]


def sift_bb84(alice: Iterable[AliceRecord], bob: Iterable[Optional[BobRecord]]) -> tuple[SiftedKey, SiftedKey]:
    clock, b1, b2, b3, port = _align(alice, bob)
    keep = bb84_keep(b2, b3)
    return SiftedKey(b1[keep], clock[keep]), SiftedKey(port[keep], clock[keep])


def sift_sarg04(alice: Iterable[AliceRecord], bob: Iterable[Optional[BobRecord]]) -> tuple[SiftedKey, SiftedKey]:
    clock, b1, b2, b3, port = _align(alice, bob)
    keep, bob_bit = sarg04_decide(b1, b3, port)
    return SiftedKey(b2[keep], clock[keep]), SiftedKey(bob_bit[keep], clock[keep])
