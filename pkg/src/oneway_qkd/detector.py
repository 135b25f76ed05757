"""Gated InGaAs/InP APD pair.

Each detector clicks in a gate when an absorbed photon, a dark count or an
after-pulse triggers an avalanche.  Photons are absorbed independently with
probability ``qe``.  An avalanche arms an after-pulse for the *next* gate
only (one-gate memory).

Two implementations share the same probability law: :func:`gate_detect`
handles one gate at a time and :func:`gate_detect_batch` handles a block of
consecutive gates with numpy, carrying the after-pulse state between calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidParameterError
from .optics import Slot

_BELOW_ONE = math.nextafter(1.0, 0.0)


class DoubleClickPolicy(str, Enum):
    RANDOM_PORT = "random_port"
    DISCARD = "discard"


class DarkModel(NamedTuple):
    """Dark-count probability per gate as ``a * exp(b * qe)``."""

    a: float
    b: float

    def __call__(self, qe: float) -> float:
        return dark_model_eval(qe, self)


@dataclass(frozen=True)
class DetectorParams:
    qe: float = 0.1
    dark_per_gate: float = 0.0
    ap_prob: float = 0.0
    double_click_policy: DoubleClickPolicy = DoubleClickPolicy.RANDOM_PORT

    def __post_init__(self):
        if not 0.0 < self.qe <= 1.0:
            raise InvalidParameterError(f"qe must lie in (0, 1], got {self.qe}")
        if not 0.0 <= self.dark_per_gate < 1.0:
            raise InvalidParameterError(f"dark_per_gate must lie in [0, 1), got {self.dark_per_gate}")
        if not 0.0 <= self.ap_prob < 1.0:
            raise InvalidParameterError(f"ap_prob must lie in [0, 1), got {self.ap_prob}")
        object.__setattr__(self, "double_click_policy", DoubleClickPolicy(self.double_click_policy))

    @classmethod
    def from_dark_model(cls, qe: float, model: DarkModel, **kwargs) -> "DetectorParams":
        return cls(qe=qe, dark_per_gate=dark_model_eval(qe, model), **kwargs)


@dataclass
class DetectorState:
    pending_afterpulse: list[bool] = field(default_factory=lambda: [False, False])

    def reset(self) -> None:
        self.pending_afterpulse = [False, False]


class Click(NamedTuple):
    port: int
    slot: Slot


def dark_model_eval(qe: float, model: DarkModel | tuple[float, float]) -> float:
    a, b = model
    if not 0.0 < qe <= 1.0:
        raise InvalidParameterError(f"qe must lie in (0, 1], got {qe}")
    d = a * math.exp(b * qe)
    return min(max(d, 0.0), _BELOW_ONE)


def fit_dark_model(p1: tuple[float, float], p2: tuple[float, float]) -> DarkModel:
    """Exponential curve through two ``(qe, d)`` points."""
    (q1, d1), (q2, d2) = p1, p2
    if q1 == q2:
        raise InvalidParameterError("fit points must have distinct qe values")
    if not (d1 > 0.0 and d2 > 0.0):
        raise InvalidParameterError("dark-count probabilities must be positive to fit an exponential")
    b = math.log(d2 / d1) / (q2 - q1)
    a = d1 * math.exp(-b * q1)
    return DarkModel(a=a, b=b)


def _no_click_prob(k, params: DetectorParams):
    return np.power(1.0 - params.qe, k) * (1.0 - params.dark_per_gate)


def gate_detect(
    arrival: tuple[float, float],
    params: DetectorParams,
    state: DetectorState,
    rng: np.random.Generator,
) -> Optional[Click]:
    """Run one middle-slot gate on both detectors.

    ``arrival`` holds the mean photon number reaching each detector during
    the gate.  Mutates ``state``: every avalanche arms that detector's
    after-pulse flag for the following gate, everything else clears it.
    """
    fired = [False, False]
    for j in (0, 1):
        mean = arrival[j]
        if mean < 0.0:
            raise InvalidParameterError(f"arrival mean must be >= 0, got {mean}")
        k = int(rng.poisson(mean)) if mean > 0.0 else 0
        p_quiet = float(_no_click_prob(k, params))
        if state.pending_afterpulse[j]:
            p_quiet *= 1.0 - params.ap_prob
        fired[j] = bool(rng.random() < 1.0 - p_quiet)
    state.pending_afterpulse = list(fired)

    if fired[0] and fired[1]:
        if params.double_click_policy is DoubleClickPolicy.DISCARD:
            return None
        return Click(int(rng.integers(0, 2)), Slot.MIDDLE)
    if fired[0]:
        return Click(0, Slot.MIDDLE)
    if fired[1]:
        return Click(1, Slot.MIDDLE)
    return None


def gate_detect_batch(
    means: np.ndarray,
    params: DetectorParams,
    state: DetectorState,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`gate_detect` over consecutive gates.

    Parameters
    ----------
    means : ndarray, shape (n, 2)
        Mean photon number reaching detectors 0 and 1 in each gate.

    Returns
    -------
    port : ndarray of int8, shape (n,)
        Reported port per gate, ``-1`` where nothing is reported.
    fired : ndarray of bool, shape (n, 2)
        Raw avalanche indicator per detector (before double-click arbitration).
    """
    means = np.asarray(means, dtype=float)
    n = means.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int8), np.zeros((0, 2), dtype=bool)
    if np.any(means < 0.0):
        raise InvalidParameterError("arrival means must be >= 0")

    k = rng.poisson(means)
    u = rng.random((n, 2))
    p_quiet = _no_click_prob(k, params)
    fired = u < 1.0 - p_quiet

    if params.ap_prob > 0.0:
        ap_fired = u < 1.0 - p_quiet * (1.0 - params.ap_prob)
        # gates following an avalanche, walked forward until no new clicks appear
        gi, pj = np.nonzero(fired[:-1])
        gi = gi + 1
        if state.pending_afterpulse[0] or state.pending_afterpulse[1]:
            carry = np.array([j for j in (0, 1) if state.pending_afterpulse[j]])
            gi = np.concatenate([np.zeros(len(carry), dtype=gi.dtype), gi])
            pj = np.concatenate([carry, pj])
        while gi.size:
            new = ap_fired[gi, pj] & ~fired[gi, pj]
            gi, pj = gi[new], pj[new]
            fired[gi, pj] = True
            keep = gi + 1 < n
            gi, pj = gi[keep] + 1, pj[keep]

    state.pending_afterpulse = [bool(fired[-1, 0]), bool(fired[-1, 1])]

    port = np.full(n, -1, dtype=np.int8)
    port[fired[:, 0] & ~fired[:, 1]] = 0
    port[fired[:, 1] & ~fired[:, 0]] = 1
    both = np.flatnonzero(fired[:, 0] & fired[:, 1])
    if both.size and params.double_click_policy is DoubleClickPolicy.RANDOM_PORT:
        port[both] = rng.integers(0, 2, size=both.size)
    return port, fired
