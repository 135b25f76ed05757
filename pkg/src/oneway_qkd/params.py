"""System configuration shared by the model, the simulator and the protocol."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

from .channel import DEFAULT_ALPHA_DB_PER_KM, db_to_linear
from .detector import DetectorParams
from .errors import InvalidParameterError
from .optics import OpticsParams


class Protocol(str, Enum):
    BB84 = "bb84"
    SARG04 = "sarg04"


class QberMode(str, Enum):
    LUMPED = "lumped"
    DECOMPOSED = "decomposed"


# Dark count per gate that puts the QE=10% distance limit at 98 km with the
# default 3 dB Alice loss.  A calibration product, not a measured value.
DEFAULT_DARK_PER_GATE = 3.30e-6
DEFAULT_QBER_OPT = 0.01

# fraction of detections that survive sifting, before the middle-slot factor
_SIFT_YIELD = {Protocol.BB84: 0.5, Protocol.SARG04: 0.25}


@dataclass(frozen=True)
class SystemParams:
    clock_hz: float = 1e6
    mu: float = 0.1
    alice_loss_db: float = 3.0
    detector: DetectorParams = field(
        default_factory=lambda: DetectorParams(qe=0.1, dark_per_gate=DEFAULT_DARK_PER_GATE)
    )
    optics: OpticsParams = field(default_factory=lambda: OpticsParams.from_qber_opt(DEFAULT_QBER_OPT))
    alpha_db_per_km: float = DEFAULT_ALPHA_DB_PER_KM
    protocol: Protocol = Protocol.BB84
    ec_efficiency: float = 1.2
    qber_mode: QberMode = QberMode.LUMPED
    # distillation knobs
    safety_bits: int = 30
    qber_sample: int | None = None
    cascade_passes: int = 4
    k1_coefficient: float = 0.73

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "qber_mode", QberMode(self.qber_mode))
        checks = {
            "clock_hz": self.clock_hz > 0.0,
            "mu": self.mu >= 0.0,
            "alice_loss_db": self.alice_loss_db >= 0.0,
            "alpha_db_per_km": self.alpha_db_per_km > 0.0,
            "ec_efficiency": self.ec_efficiency >= 1.0,
            "safety_bits": self.safety_bits >= 0,
            "cascade_passes": self.cascade_passes >= 1,
            "k1_coefficient": self.k1_coefficient > 0.0,
        }
        for name, ok in checks.items():
            if not ok:
                raise InvalidParameterError(f"{name} out of range: {getattr(self, name)!r}")
        if self.qber_sample is not None and self.qber_sample < 1:
            raise InvalidParameterError(f"qber_sample must be positive, got {self.qber_sample}")
        if self.qber_opt >= 0.5:
            raise InvalidParameterError(f"effective optical QBER must be < 0.5, got {self.qber_opt}")

    @property
    def qe(self) -> float:
        return self.detector.qe

    @property
    def dark_per_gate(self) -> float:
        return self.detector.dark_per_gate

    @property
    def qber_opt(self) -> float:
        """Error probability of a signal photon in the sifted key."""
        q = self.optics.qber_opt
        if self.qber_mode is QberMode.DECOMPOSED:
            q += self.detector.ap_prob / 4.0
        return q

    @property
    def sift_factor(self) -> float:
        """Middle-slot fraction times sifting yield: 1/4 for BB84, 1/8 for SARG04."""
        return 0.5 * _SIFT_YIELD[self.protocol]

    @property
    def emitted_mu(self) -> float:
        """Mean photon number entering the fiber (after Alice's internal loss)."""
        return self.mu * db_to_linear(self.alice_loss_db)

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def with_detector(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, detector=dataclasses.replace(self.detector, **changes))


def to_flat(p: SystemParams) -> dict:
    """Flat ``key -> value`` view, the form used by config files and PARAMS frames."""
    return {
        "clock_hz": p.clock_hz,
        "mu": p.mu,
        "alice_loss_db": p.alice_loss_db,
        "qe": p.detector.qe,
        "dark_per_gate": p.detector.dark_per_gate,
        "ap_prob": p.detector.ap_prob,
        "double_click_policy": p.detector.double_click_policy.value,
        "visibility": p.optics.visibility,
        "alpha_db_per_km": p.alpha_db_per_km,
        "protocol": p.protocol.value,
        "ec_efficiency": p.ec_efficiency,
        "qber_mode": p.qber_mode.value,
        "safety_bits": p.safety_bits,
        "qber_sample": p.qber_sample,
        "cascade_passes": p.cascade_passes,
        "k1_coefficient": p.k1_coefficient,
    }


def from_flat(d: dict) -> SystemParams:
    d = dict(d)
    detector = DetectorParams(
        qe=d.pop("qe"),
        dark_per_gate=d.pop("dark_per_gate"),
        ap_prob=d.pop("ap_prob"),
        double_click_policy=d.pop("double_click_policy"),
    )
    optics = OpticsParams(visibility=d.pop("visibility"))
    return SystemParams(detector=detector, optics=optics, **d)
