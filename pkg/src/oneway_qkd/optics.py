"""Weak-coherent source and double asymmetric Mach-Zehnder interferometer.

Alice's encoding AMZI produces a double pulse whose relative phase is set by
two modulators (0/pi and 0/pi/2).  Bob adds 0 or pi/2 before the decoding
AMZI.  Photons leave the decoder in three timeslots; only the middle slot
interferes and depends on the phase difference.

Phases are also handled as integer quarter-turns (``0..3`` meaning
``k * pi/2``), which is what the vectorised simulation path uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import InvalidParameterError

QUARTER = math.pi / 2
TWO_PI = 2.0 * math.pi


class Slot(IntEnum):
    EARLY = 0
    MIDDLE = 1
    LATE = 2


@dataclass(frozen=True)
class OpticsParams:
    """Interferometer quality, expressed as classical fringe visibility."""

    visibility: float = 0.98

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise InvalidParameterError(f"visibility must lie in [0, 1], got {self.visibility}")

    @classmethod
    def from_qber_opt(cls, qber_opt: float) -> "OpticsParams":
        if not 0.0 <= qber_opt <= 0.5:
            raise InvalidParameterError(f"qber_opt must lie in [0, 0.5], got {qber_opt}")
        return cls(visibility=1.0 - 2.0 * qber_opt)

    @property
    def extinction_ratio(self) -> float:
        if self.visibility == 0.0:
            return 1.0
        return (1.0 - self.visibility) / (1.0 + self.visibility)

    @property
    def qber_opt(self) -> float:
        return (1.0 - self.visibility) / 2.0


@dataclass(frozen=True)
class EncodedPulse:
    clock_index: int
    phase_a: float
    mean_photons: float

    @property
    def quarter_turns(self) -> int:
        return phase_to_quarters(self.phase_a)


@dataclass(frozen=True)
class TimeslotDistribution:
    """Detection probability per (slot, port); ``p[slot][port]``."""

    p: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]

    def __getitem__(self, slot: int) -> tuple[float, float]:
        return self.p[slot]

    @property
    def middle(self) -> tuple[float, float]:
        return self.p[Slot.MIDDLE]

    def total(self) -> float:
        return math.fsum(x for row in self.p for x in row)

    def as_array(self) -> np.ndarray:
        return np.array(self.p, dtype=float)


def phase_to_quarters(phase: float) -> int:
    k = phase / QUARTER
    r = round(k)
    if abs(k - r) > 1e-9:
        raise InvalidParameterError(f"phase {phase} is not a multiple of pi/2")
    return int(r) % 4


def _check_bit(name: str, value: int) -> int:
    if value not in (0, 1):
        raise InvalidParameterError(f"{name} must be 0 or 1, got {value!r}")
    return int(value)


def encode_pulse(b1: int, b2: int, mu: float, clock: int) -> EncodedPulse:
    """Alice's double pulse: phase ``b1*pi + b2*pi/2`` (mod 2pi)."""
    b1 = _check_bit("b1", b1)
    b2 = _check_bit("b2", b2)
    if not mu >= 0.0:
        raise InvalidParameterError(f"mean photon number must be >= 0, got {mu}")
    return EncodedPulse(clock_index=clock, phase_a=((2 * b1 + b2) % 4) * QUARTER, mean_photons=float(mu))


def bob_phase(b3: int) -> float:
    return _check_bit("b3", b3) * QUARTER


def middle_port_probs(delta_phi, visibility: float):
    """Middle-slot probabilities for ports 0 and 1 (each already halved).

    Works elementwise on arrays as well as on scalars.
    """
    c = visibility * np.cos(delta_phi)
    return 0.25 * (1.0 + c), 0.25 * (1.0 - c)


# cos(k*pi/2) for k = 0..3, exact
_COS_QUARTER = np.array([1.0, 0.0, -1.0, 0.0])


def middle_port_probs_quarters(delta_q: np.ndarray, visibility: float):
    """Same as :func:`middle_port_probs` with the phase given in quarter-turns."""
    c = visibility * _COS_QUARTER[np.asarray(delta_q) % 4]
    return 0.25 * (1.0 + c), 0.25 * (1.0 - c)


def detection_distribution(phase_a: float, phase_b: float, optics: OpticsParams) -> TimeslotDistribution:
    """Where a photon leaves the decoding AMZI.

    The early and late slots carry half the probability, split evenly over
    the two ports; the middle slot carries the other half and splits
    according to ``1 +/- V cos(phase_a - phase_b)``.
    """
    delta = phase_a - phase_b
    try:
        c = _COS_QUARTER[phase_to_quarters(delta)]
    except InvalidParameterError:
        c = math.cos(delta)
    c *= optics.visibility
    outer = (0.125, 0.125)
    middle = (0.25 * (1.0 + c), 0.25 * (1.0 - c))
    return TimeslotDistribution(p=(outer, middle, outer))


def sample_photon_count(mu: float, rng: np.random.Generator) -> int:
    if not mu >= 0.0:
        raise InvalidParameterError(f"mean photon number must be >= 0, got {mu}")
    if mu == 0.0:
        return 0
    return int(rng.poisson(mu))
