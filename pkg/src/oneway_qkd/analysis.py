"""Closed-form link model: sifted rate, QBER, final rate and distance limits.

Rates are computed per clock and converted to bits/s with ``clock_hz`` at the
boundary.  Per clock, the sifted probability has a signal part

    mu * 10**(-alice_loss_db/10) * qe * sift_factor * T(L)

(``sift_factor`` = 1/4 for BB84, 1/8 for SARG04) and a dark part ``d``
(two detectors, half the clicks survive sifting).  Errors come from the
optical imperfection on the signal part and from half of the dark part:

    QBER = (q_opt * signal + d / 2) / (signal + d)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import db_to_linear, transmittance
from .detector import DarkModel, fit_dark_model
from .errors import CalibrationError, DegenerateConfigurationError, InvalidParameterError, UndefinedQBERError
from .params import SystemParams
from .postproc.security import binary_entropy, pa_cost, security_limit

UNBOUNDED = math.inf
# the two anchors quoted for the measured system
ANCHOR_QBER_QE = 0.05
ANCHOR_QBER_LENGTH_KM = 100.0
ANCHOR_QBER = 0.06
ANCHOR_LIMIT_QE = 0.10
ANCHOR_LIMIT_KM = 98.0


@dataclass(frozen=True)
class RatePoint:
    length_km: float
    r_sift: float
    r_error: float
    qber: float
    r_final: float


def signal_per_clock(p: SystemParams, length_km: float) -> float:
    return p.mu * db_to_linear(p.alice_loss_db) * p.qe * p.sift_factor * transmittance(length_km, p.alpha_db_per_km)


def sifted_rate_model(p: SystemParams, length_km: float) -> tuple[float, float]:
    """``(signal, dark)`` contributions to the sifted rate, in bits/s."""
    return p.clock_hz * signal_per_clock(p, length_km), p.clock_hz * p.dark_per_gate


def _qber(q_opt: float, signal: float, dark: float) -> float:
    total = signal + dark
    if total <= 0.0:
        raise UndefinedQBERError("sifted rate is zero; QBER undefined")
    return (q_opt * signal + 0.5 * dark) / total


def qber_model(p: SystemParams, length_km: float) -> float:
    return _qber(p.qber_opt, signal_per_clock(p, length_km), p.dark_per_gate)


def _fraction(q: float, ec_efficiency: float) -> float:
    """Secret fraction without the clamp at zero (sign used for root finding)."""
    return 1.0 - pa_cost(q) - ec_efficiency * binary_entropy(q)


def final_rate_model(p: SystemParams, length_km: float, ec_efficiency: float | None = None) -> float:
    f = p.ec_efficiency if ec_efficiency is None else ec_efficiency
    signal, dark = sifted_rate_model(p, length_km)
    q = qber_model(p, length_km)
    return (signal + dark) * max(0.0, _fraction(q, f))


def rate_point(p: SystemParams, length_km: float, ec_efficiency: float | None = None) -> RatePoint:
    signal, dark = sifted_rate_model(p, length_km)
    r_sift = signal + dark
    q = qber_model(p, length_km)
    return RatePoint(length_km, r_sift, q * r_sift, q, final_rate_model(p, length_km, ec_efficiency))


def distance_limit(p: SystemParams, ec_efficiency: float = 1.0, tol_km: float = 1e-4) -> float:
    """Shortest fiber length at which the final rate reaches zero.

    Returns :data:`UNBOUNDED` when the QBER never reaches the security limit
    (no dark counts and a clean interferometer).
    """
    g = lambda L: _fraction(qber_model(p, L), ec_efficiency)  # noqa: E731
    if g(0.0) <= 0.0:
        raise DegenerateConfigurationError("no positive key rate even at zero length")
    if p.dark_per_gate == 0.0:
        return UNBOUNDED
    lo, hi = 0.0, 50.0
    while g(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            return UNBOUNDED
    while hi - lo > tol_km:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def calibrate_dark(p: SystemParams, qe: float, length_km: float, qber_ref: float) -> float:
    """Dark count per gate that makes the QBER model hit ``qber_ref`` at ``length_km``.

    Inverts ``qber_ref = (q_opt*s + d/2) / (s + d)`` for ``d`` with the
    signal ``s`` evaluated at ``qe``.
    """
    q_opt = p.qber_opt
    if not q_opt < qber_ref < 0.5:
        raise CalibrationError(f"anchor QBER {qber_ref} must lie strictly between q_opt={q_opt} and 0.5")
    s = signal_per_clock(p.with_detector(qe=qe), length_km)
    return s * (qber_ref - q_opt) / (0.5 - qber_ref)


def calibrate_dark_from_limit(p: SystemParams, qe: float, limit_km: float, ec_efficiency: float = 1.0) -> float:
    """Dark count per gate that puts the distance limit at ``limit_km``."""
    return calibrate_dark(p, qe, limit_km, security_limit(ec_efficiency))


def build_dark_curve(d5: float, d10: float) -> DarkModel:
    return fit_dark_model((0.05, d5), (0.10, d10))


@dataclass(frozen=True)
class Calibration:
    d5: float
    d10: float
    model: DarkModel
    limit_qe5_km: float
    limit_qe10_km: float
    limit_qe10_low_dark_km: float

    @property
    def ratio(self) -> float:
        return self.d10 / self.d5


def anchor_calibration(p: SystemParams, dark_reduction: float = 10.0) -> Calibration:
    """Calibrate both anchors for ``p`` and derive the three distance limits.

    ``d5`` reproduces 6 % QBER at 100 km with QE=5 %; ``d10`` puts the QE=10 %
    limit at 98 km.  The last limit uses ``d10 / dark_reduction`` at QE=10 %.
    """
    d5 = calibrate_dark(p, ANCHOR_QBER_QE, ANCHOR_QBER_LENGTH_KM, ANCHOR_QBER)
    d10 = calibrate_dark_from_limit(p, ANCHOR_LIMIT_QE, ANCHOR_LIMIT_KM)
    return Calibration(
        d5=d5,
        d10=d10,
        model=build_dark_curve(d5, d10),
        limit_qe5_km=distance_limit(p.with_detector(qe=ANCHOR_QBER_QE, dark_per_gate=d5)),
        limit_qe10_km=distance_limit(p.with_detector(qe=ANCHOR_LIMIT_QE, dark_per_gate=d10)),
        limit_qe10_low_dark_km=distance_limit(
            p.with_detector(qe=ANCHOR_LIMIT_QE, dark_per_gate=d10 / dark_reduction)
        ),
    )


@dataclass(frozen=True)
class MCReport:
    length_km: float
    n_clocks: int
    sifted: int
    errors: int
    model_sifted: float
    model_qber: float
    z_rate: float
    z_qber: float
    status: str

    @property
    def measured_qber(self) -> float:
        return self.errors / self.sifted if self.sifted else float("nan")

    @property
    def measured_rate_bps(self) -> float:
        return self.sifted / self.n_clocks

    def consistent(self, z_max: float = 3.0) -> bool:
        return abs(self.z_rate) < z_max and abs(self.z_qber) < z_max


def mc_vs_model(p: SystemParams, length_km: float, n_clocks: int, seed: int | None = None) -> MCReport:
    """Simulate the quantum exchange and compare sifted count and QBER with the model.

    The measured QBER is the mismatch fraction over the whole sifted key.
    z-scores use binomial standard deviations at the model values; the
    status is ``"warning"`` when fewer than 1000 sifted bits are expected.
    """
    from .session.link import simulate_link

    run = simulate_link(p, length_km, n_clocks, seed)
    key_a, key_b = run.sift(p.protocol)
    sifted = len(key_a)
    errors = int(np.count_nonzero(key_a.bits != key_b.bits))

    per_clock = signal_per_clock(p, length_km) + p.dark_per_gate
    expected = n_clocks * per_clock
    q = qber_model(p, length_km)
    sd_rate = math.sqrt(n_clocks * per_clock * (1.0 - per_clock))
    z_rate = (sifted - expected) / sd_rate if sd_rate > 0 else 0.0
    if sifted and 0.0 < q < 1.0:
        z_qber = (errors / sifted - q) / math.sqrt(q * (1.0 - q) / sifted)
    else:
        z_qber = 0.0 if errors == 0 else math.inf
    return MCReport(
        length_km=length_km,
        n_clocks=n_clocks,
        sifted=sifted,
        errors=errors,
        model_sifted=expected,
        model_qber=q,
        z_rate=z_rate,
        z_qber=z_qber,
        status="ok" if expected >= 1000 else "warning",
    )
