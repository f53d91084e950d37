"""Skip-mode decisions and the Gumbel-softmax relaxation used to train them.

A mask element of 1 means "entropy-code this element"; 0 means "skip it and
let the decoder substitute the rounded prior mean".
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .entropy.gaussian import GaussianPrior, as_mask, center_symbols, check_dims, gaussian_bits
from .errors import InputDataError

E_MAX = 2

IMPLICIT = "implicit"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class MaskPolicy:
    """How to decide a skip mask.

    ``scale_threshold`` keeps elements whose prior scale is at least
    ``threshold`` and reads nothing but the prior, so it can run in implicit
    mode. ``greedy_utility`` and ``external`` need the latent or a file and
    must be signalled explicitly.
    """

    kind: str
    threshold: float = 0.0
    bit_budget: float = 0.0
    path: str | None = None
    mode: str = IMPLICIT

    def __post_init__(self):
        if self.kind not in ("scale_threshold", "greedy_utility", "external"):
            raise ValueError(f"unknown mask policy {self.kind!r}")
        if self.mode not in (IMPLICIT, EXPLICIT):
            raise ValueError(f"unknown mask mode {self.mode!r}")
        if self.kind != "scale_threshold" and self.mode != EXPLICIT:
            raise ValueError(f"{self.kind} policy requires explicit mode")
        if self.kind == "external" and not self.path:
            raise ValueError("external policy needs a mask file path")

    @property
    def implicit(self) -> bool:
        return self.mode == IMPLICIT

    @classmethod
    def parse(cls, text: str, mode: str | None = None) -> "MaskPolicy":
        """Parse ``scale:0.5``, ``greedy:1200`` or ``file:path.bin``."""
        kind, _, arg = text.partition(":")
        try:
            if kind == "scale":
                return cls("scale_threshold", threshold=float(arg), mode=mode or IMPLICIT)
            if kind == "greedy":
                return cls("greedy_utility", bit_budget=float(arg), mode=EXPLICIT)
            if kind == "file":
                return cls("external", path=arg, mode=EXPLICIT)
        except ValueError as exc:
            raise InputDataError(f"bad mask policy {text!r}: {exc}") from None
        raise InputDataError(f"bad mask policy {text!r}; expected scale:T, greedy:BITS or file:PATH")


def _softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def gumbel_noise(shape, seed) -> np.ndarray:
    return np.random.default_rng(seed).gumbel(size=shape)


def gumbel_softmax(logits, temperature: float, seed) -> np.ndarray:
    """Relaxed one-hot sample ``softmax((logits + g) / temperature)``.

    ``g`` is standard Gumbel noise drawn from ``seed``; the last axis is the
    category axis.
    """
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    return _softmax((logits + gumbel_noise(logits.shape, seed)) / temperature)


def straight_through(probs) -> np.ndarray:
    """Forward pass of the straight-through estimator: one-hot of the argmax.

    Ties go to the lowest index. The backward contract is the identity, see
    :func:`straight_through_backward`.
    """
    p = np.asarray(probs, dtype=np.float64)
    hard = np.zeros_like(p)
    idx = np.argmax(p, axis=-1)
    np.put_along_axis(hard, idx[..., None], 1.0, axis=-1)
    return hard


def straight_through_backward(grad_output) -> np.ndarray:
    return np.asarray(grad_output, dtype=np.float64)


def softmax_vjp(y, grad_y, temperature: float = 1.0) -> np.ndarray:
    """Vector-Jacobian product of ``y = softmax(z / temperature)`` w.r.t. ``z``."""
    y = np.asarray(y, dtype=np.float64)
    g = np.asarray(grad_y, dtype=np.float64)
    return y * (g - np.sum(g * y, axis=-1, keepdims=True)) / temperature


def st_gumbel_grad(logits, noise, temperature, loss_grad) -> tuple[np.ndarray, np.ndarray]:
    """Straight-through Gumbel gradient of a loss w.r.t. the logits.

    The forward output is the hard one-hot; ``loss_grad(hard)`` is passed
    back unchanged and then through the soft sample's Jacobian.
    Returns ``(hard, grad_logits)``.
    """
    soft = _softmax((np.asarray(logits, np.float64) + noise) / temperature)
    hard = straight_through(soft)
    upstream = straight_through_backward(loss_grad(hard))
    return hard, softmax_vjp(soft, upstream, temperature)


def scale_threshold_mask(prior: GaussianPrior, threshold: float) -> np.ndarray:
    return (prior.scale >= threshold).astype(np.uint8)


def greedy_utility_mask(latent, prior: GaussianPrior, bit_budget: float) -> np.ndarray:
    """Keep the most expensive (least predictable) elements within a bit budget.

    Elements whose skip error would exceed ``E_MAX`` are always kept and
    charged first. Remaining elements are taken in decreasing order of their
    coding cost (ties by flat index) until the next one would overrun.
    """
    latent = np.asarray(latent)
    check_dims(latent, prior)
    bits = np.asarray(gaussian_bits(latent, prior.mean, prior.scale)).ravel()
    err = np.abs(latent.ravel().astype(np.int64) - center_symbols(prior.mean).ravel())
    keep = err > E_MAX
    spent = float(bits[keep].sum())
    eligible = np.flatnonzero(~keep)
    order = eligible[np.argsort(-bits[eligible], kind="stable")]
    for i in order:
        if spent + bits[i] > bit_budget:
            break
        keep[i] = True
        spent += bits[i]
    return keep.reshape(latent.shape).astype(np.uint8)


def decide_mask(prior: GaussianPrior, latent=None, policy: MaskPolicy | None = None) -> np.ndarray:
    if policy is None:
        raise ValueError("a mask policy is required")
    if policy.kind == "scale_threshold":
        # implicit masks must be reproducible from the prior alone
        return scale_threshold_mask(prior, policy.threshold)
    if policy.kind == "greedy_utility":
        if latent is None:
            raise ValueError("greedy_utility needs the latent")
        return greedy_utility_mask(latent, prior, policy.bit_budget)
    mask = read_mask_file(policy.path)
    if mask.shape != prior.dims:
        raise InputDataError(f"mask file dims {mask.shape} != prior dims {prior.dims}")
    return mask


def apply_skip(latent, prior: GaussianPrior, mask) -> np.ndarray:
    """Replace skipped elements with the rounded prior mean."""
    latent = np.asarray(latent)
    mask = as_mask(mask)
    check_dims(latent, prior, mask)
    return np.where(mask.astype(bool), latent, center_symbols(prior.mean)).astype(latent.dtype)


_DIMS = struct.Struct("<III")


def write_mask_file(path, mask) -> None:
    mask = as_mask(mask)
    if mask.ndim != 3:
        raise InputDataError("mask file holds (c, h, w) masks")
    Path(path).write_bytes(_DIMS.pack(*mask.shape) + np.packbits(mask.ravel()).tobytes())


def read_mask_file(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _DIMS.size:
        raise InputDataError(f"{path}: mask file shorter than its header")
    dims = _DIMS.unpack_from(data)
    n = int(np.prod(dims))
    packed = np.frombuffer(data, dtype=np.uint8, offset=_DIMS.size)
    if packed.size != (n + 7) // 8:
        raise InputDataError(f"{path}: expected {(n + 7) // 8} packed bytes for dims {dims}, got {packed.size}")
    return np.unpackbits(packed, count=n).reshape(dims)


def write_mask_csv(path, mask) -> None:
    """One row per spatial cell with the fraction of channels kept."""
    mask = as_mask(mask)
    frac = mask.mean(axis=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "x", "keep_fraction"])
        for y in range(frac.shape[0]):
            for x in range(frac.shape[1]):
                w.writerow([y, x, f"{frac[y, x]:.6g}"])
