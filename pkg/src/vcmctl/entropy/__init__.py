"""Gaussian-conditional rate model and skip-mode range coding."""

from .bitstream import (
    MODE_EXPLICIT,
    MODE_IMPLICIT,
    Bitstream,
    decode_tensor,
    encode_tensor,
    mask_signaling_bits,
)
from .gaussian import (
    PROB_FLOOR,
    SCALE_MIN,
    SYMBOL_MAX,
    SYMBOL_MIN,
    GaussianPrior,
    center_symbols,
    estimate_rate,
    gaussian_bits,
    quantize,
    round_half_away,
)

__all__ = [
    "MODE_EXPLICIT",
    "MODE_IMPLICIT",
    "PROB_FLOOR",
    "SCALE_MIN",
    "SYMBOL_MAX",
    "SYMBOL_MIN",
    "Bitstream",
    "GaussianPrior",
    "center_symbols",
    "decode_tensor",
    "encode_tensor",
    "estimate_rate",
    "gaussian_bits",
    "mask_signaling_bits",
    "quantize",
    "round_half_away",
]
