"""Simulator and protocol stack for a one-way, phase-encoded QKD link."""
from .analysis import (
    RatePoint,
    calibrate_dark,
    distance_limit,
    final_rate_model,
    mc_vs_model,
    qber_model,
    sifted_rate_model,
)
from .channel import ChannelParams, propagate, transmittance
from .detector import DetectorParams, DetectorState, dark_model_eval, fit_dark_model, gate_detect
from .optics import OpticsParams, bob_phase, detection_distribution, encode_pulse, sample_photon_count
from .params import Protocol, QberMode, SystemParams

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "DetectorParams",
    "DetectorState",
    "OpticsParams",
    "Protocol",
    "QberMode",
    "RatePoint",
    "SystemParams",
    "bob_phase",
    "calibrate_dark",
    "dark_model_eval",
    "detection_distribution",
    "distance_limit",
    "encode_pulse",
    "final_rate_model",
    "fit_dark_model",
    "gate_detect",
    "mc_vs_model",
    "propagate",
    "qber_model",
    "sample_photon_count",
    "sifted_rate_model",
    "transmittance",
]
