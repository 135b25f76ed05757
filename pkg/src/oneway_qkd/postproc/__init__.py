"""Classical distillation: QBER estimate, Cascade, secret fraction, Toeplitz PA."""
from .cascade import CascadeParams, cascade_correct, first_block_size
from .estimation import default_sample_size, estimate_qber
from .privacy import PaParams, privacy_amplify
from .security import (
    binary_entropy,
    final_key_length,
    pa_cost,
    secret_fraction,
    security_limit,
)

__all__ = [
    "CascadeParams",
    "PaParams",
    "binary_entropy",
    "cascade_correct",
    "default_sample_size",
    "estimate_qber",
    "final_key_length",
    "first_block_size",
    "pa_cost",
    "privacy_amplify",
    "secret_fraction",
    "security_limit",
]
