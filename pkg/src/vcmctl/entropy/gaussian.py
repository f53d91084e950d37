"""Quantization and the Gaussian-conditional rate model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from ..errors import InputDataError

SCALE_MIN = 0.11
PROB_FLOOR = 2.0**-16
SYMBOL_MIN = -(2**15)
SYMBOL_MAX = 2**15 - 1

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def round_half_away(values) -> np.ndarray:
    """Round half away from zero (``-1.5 -> -2``, ``2.5 -> 3``)."""
    v = np.asarray(values, dtype=np.float64)
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def quantize(values) -> np.ndarray:
    """Quantize real values to int32 symbols, saturating at the 16-bit alphabet."""
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise InputDataError("cannot quantize non-finite values")
    return np.clip(round_half_away(v), SYMBOL_MIN, SYMBOL_MAX).astype(np.int32)


def center_symbols(mean) -> np.ndarray:
    """The symbol a skipped element decodes to: rounded, saturated mean."""
    return np.clip(round_half_away(mean), SYMBOL_MIN, SYMBOL_MAX).astype(np.int32)


@dataclass(frozen=True)
class GaussianPrior:
    """Per-element mean and scale predicted by a hyperprior.

    Scales are clamped to ``SCALE_MIN`` on construction.
    """

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        scale = np.asarray(self.scale, dtype=np.float64)
        if mean.shape != scale.shape:
            raise InputDataError(f"mean shape {mean.shape} != scale shape {scale.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(scale))):
            raise InputDataError("prior must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", np.maximum(scale, SCALE_MIN))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.mean.shape

    @classmethod
    def standard(cls, dims, mean=0.0, scale=1.0) -> "GaussianPrior":
        return cls(np.full(dims, mean, dtype=np.float64), np.full(dims, scale, dtype=np.float64))


def _interval_mass(lo, hi):
    # Mass of N(0,1) on [lo, hi] using whichever tail keeps precision.
    lo, hi = np.broadcast_arrays(np.asarray(lo, np.float64), np.asarray(hi, np.float64))
    out = np.empty(lo.shape)
    right = lo >= 0
    left = hi <= 0
    mid = ~(right | left)
    out[right] = 0.5 * (erfc(lo[right] * _INV_SQRT2) - erfc(hi[right] * _INV_SQRT2))
    out[left] = 0.5 * (erfc(-hi[left] * _INV_SQRT2) - erfc(-lo[left] * _INV_SQRT2))
    out[mid] = 1.0 - 0.5 * erfc(-lo[mid] * _INV_SQRT2) - 0.5 * erfc(hi[mid] * _INV_SQRT2)
    return out


def gaussian_bits(symbol, mean, scale):
    """Bits to code integer ``symbol`` under a discretized N(mean, scale).

    Probability is the Gaussian mass on ``[symbol - 0.5, symbol + 0.5]``,
    floored at ``PROB_FLOOR``; scales below ``SCALE_MIN`` are clamped.
    Broadcasts; returns a float for scalar input.
    """
    s = np.asarray(symbol, dtype=np.float64)
    mu = np.asarray(mean, dtype=np.float64)
    sigma = np.maximum(np.asarray(scale, dtype=np.float64), SCALE_MIN)
    p = _interval_mass((s - mu - 0.5) / sigma, (s - mu + 0.5) / sigma)
    bits = -np.log2(np.maximum(p, PROB_FLOOR))
    if bits.ndim == 0:
        return float(bits)
    return bits


def check_dims(latent: np.ndarray, prior: GaussianPrior, mask: np.ndarray | None = None) -> None:
    if latent.shape != prior.dims:
        raise InputDataError(f"latent dims {latent.shape} != prior dims {prior.dims}")
    if mask is not None and mask.shape != prior.dims:
        raise InputDataError(f"mask dims {mask.shape} != prior dims {prior.dims}")


def as_mask(mask, dims=None) -> np.ndarray:
    """Coerce to a uint8 0/1 array, validating values and optionally dims."""
    m = np.asarray(mask)
    if m.dtype != np.bool_ and not np.all((m == 0) | (m == 1)):
        raise InputDataError("mask values must be 0 or 1")
    m = m.astype(np.uint8)
    if dims is not None and m.shape != tuple(dims):
        raise InputDataError(f"mask dims {m.shape} != {tuple(dims)}")
    return m


def estimate_rate(latent, prior: GaussianPrior, mask) -> float:
    """Analytic bits for the kept (mask=1) elements; skipped ones are free."""
    latent = np.asarray(latent)
    mask = as_mask(mask)
    check_dims(latent, prior, mask)
    keep = mask.astype(bool)
    if not keep.any():
        return 0.0
    return float(np.sum(gaussian_bits(latent[keep], prior.mean[keep], prior.scale[keep])))
