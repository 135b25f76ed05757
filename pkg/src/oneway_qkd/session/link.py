"""Quantum exchange: Alice's modulators, the fiber, Bob's decoder and APDs.

:func:`alice_emit` / :func:`bob_receive` simulate one clock cycle.  The
``*_batch`` functions do the same over a block of clocks with numpy and are
what sessions and Monte Carlo runs use.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..channel import ChannelParams, transmittance
from ..detector import DetectorParams, DetectorState, gate_detect, gate_detect_batch
from ..keys import SiftedKey
from ..optics import (
    EncodedPulse,
    OpticsParams,
    Slot,
    bob_phase,
    detection_distribution,
    encode_pulse,
    middle_port_probs_quarters,
)
from ..params import Protocol, SystemParams
from .sifting import AliceRecord, BobRecord, bb84_keep, sarg04_decide

CHUNK = 1 << 18


def alice_emit(rng: np.random.Generator, mu: float, clock: int) -> tuple[AliceRecord, EncodedPulse]:
    b1, b2 = (int(b) for b in rng.integers(0, 2, size=2))
    return AliceRecord(clock, b1, b2), encode_pulse(b1, b2, mu, clock)


def bob_receive(
    pulse: EncodedPulse,
    rng: np.random.Generator,
    optics: OpticsParams,
    detector: DetectorParams,
    state: DetectorState,
) -> Optional[BobRecord]:
    b3 = int(rng.integers(0, 2))
    dist = detection_distribution(pulse.phase_a, bob_phase(b3), optics)
    m0, m1 = dist[Slot.MIDDLE]
    # early/late photons arrive outside the gate
    click = gate_detect((pulse.mean_photons * m0, pulse.mean_photons * m1), detector, state, rng)
    if click is None:
        return None
    return BobRecord(pulse.clock_index, b3, click.port, click.slot)


def alice_emit_batch(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    bits = rng.integers(0, 2, size=(2, n), dtype=np.uint8)
    return bits[0], bits[1]


def alice_quarters(b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
    return ((2 * b1.astype(np.uint8) + b2) % 4).astype(np.uint8)


def bob_receive_batch(
    quarters_a: np.ndarray,
    mean_photons: float,
    basis_rng: np.random.Generator,
    phys_rng: np.random.Generator,
    optics: OpticsParams,
    detector: DetectorParams,
    state: DetectorState,
) -> tuple[np.ndarray, np.ndarray]:
    """Bob's basis choice and reported port for each clock (-1 = no click)."""
    n = quarters_a.size
    b3 = basis_rng.integers(0, 2, size=n, dtype=np.uint8)
    delta = (quarters_a.astype(np.int64) - b3) % 4
    p0, p1 = middle_port_probs_quarters(delta, optics.visibility)
    means = np.stack([mean_photons * p0, mean_photons * p1], axis=1)
    port, _ = gate_detect_batch(means, detector, state, phys_rng)
    return b3, port


@dataclass
class SeedStreams:
    """Independent generators for the three actors of a simulated session."""

    alice: np.random.Generator
    bob: np.random.Generator
    fiber: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int | None) -> "SeedStreams":
        ss = np.random.SeedSequence(seed)
        a, b, f = ss.spawn(3)
        return cls(np.random.default_rng(a), np.random.default_rng(b), np.random.default_rng(f))


@dataclass
class LinkRun:
    """Detections of a simulated link, restricted to clocks with a click."""

    n_clocks: int
    clock: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    port: np.ndarray

    def sift(self, protocol: Protocol) -> tuple[SiftedKey, SiftedKey]:
        if Protocol(protocol) is Protocol.BB84:
            keep = bb84_keep(self.b2, self.b3)
            return SiftedKey(self.b1[keep], self.clock[keep]), SiftedKey(self.port[keep], self.clock[keep])
        keep, bob_bit = sarg04_decide(self.b1, self.b3, self.port)
        return SiftedKey(self.b2[keep], self.clock[keep]), SiftedKey(bob_bit[keep], self.clock[keep])


def simulate_link(p: SystemParams, length_km: float, n_clocks: int, seed: int | None = None) -> LinkRun:
    """Run the quantum exchange alone (no classical protocol)."""
    streams = SeedStreams.from_seed(seed)
    mean = p.emitted_mu * transmittance(length_km, p.alpha_db_per_km)
    state = DetectorState()
    parts = []
    for start in range(0, n_clocks, CHUNK):
        n = min(CHUNK, n_clocks - start)
        b1, b2 = alice_emit_batch(streams.alice, n)
        b3, port = bob_receive_batch(
            alice_quarters(b1, b2), mean, streams.bob, streams.fiber, p.optics, p.detector, state
        )
        hit = np.flatnonzero(port >= 0)
        parts.append((hit + start, b1[hit], b2[hit], b3[hit], port[hit].astype(np.uint8)))
    cols = [np.concatenate([part[i] for part in parts]) if parts else np.zeros(0) for i in range(5)]
    return LinkRun(n_clocks, cols[0].astype(np.int64), *(c.astype(np.uint8) for c in cols[1:]))


def fiber_mean(p: SystemParams, length_km: float) -> float:
    return p.emitted_mu * ChannelParams(length_km, p.alpha_db_per_km).transmittance
