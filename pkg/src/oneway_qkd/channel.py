"""Fiber link: loss of mean photon number with length, phase preserved."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import InvalidParameterError
from .optics import EncodedPulse

DEFAULT_ALPHA_DB_PER_KM = 0.205


@dataclass(frozen=True)
class ChannelParams:
    length_km: float = 0.0
    # effective slope, dispersion/gate-overlap penalty included
    alpha_db_per_km: float = DEFAULT_ALPHA_DB_PER_KM

    def __post_init__(self):
        if not self.length_km >= 0.0:
            raise InvalidParameterError(f"length_km must be >= 0, got {self.length_km}")
        if not self.alpha_db_per_km > 0.0:
            raise InvalidParameterError(f"alpha_db_per_km must be > 0, got {self.alpha_db_per_km}")

    @property
    def transmittance(self) -> float:
        return transmittance(self.length_km, self.alpha_db_per_km)


def db_to_linear(loss_db: float) -> float:
    """Power fraction remaining after ``loss_db`` of attenuation."""
    return 10.0 ** (-loss_db / 10.0)


def transmittance(length_km: float, alpha: float = DEFAULT_ALPHA_DB_PER_KM) -> float:
    if not length_km >= 0.0:
        raise InvalidParameterError(f"fiber length must be >= 0, got {length_km}")
    if not alpha > 0.0:
        raise InvalidParameterError(f"attenuation must be > 0, got {alpha}")
    return db_to_linear(alpha * length_km)


def propagate(pulse: EncodedPulse, channel: ChannelParams) -> EncodedPulse:
    return dataclasses.replace(pulse, mean_photons=pulse.mean_photons * channel.transmittance)
