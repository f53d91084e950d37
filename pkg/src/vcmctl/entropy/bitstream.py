"""Tensor-level skip-mode coding and the ``GMC1`` container."""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..errors import BitstreamError, InputDataError
from . import _rc_kernels as rc
from .gaussian import SYMBOL_MAX, SYMBOL_MIN, GaussianPrior, as_mask, center_symbols, check_dims

MAGIC = b"GMC1"
VERSION = 1
MODE_IMPLICIT = 0
MODE_EXPLICIT = 1
_HEADER = struct.Struct("<4sBBIIII")
HEADER_SIZE = _HEADER.size


@dataclass(frozen=True)
class Bitstream:
    dims: tuple[int, int, int]
    mode: int
    checksum: int
    payload: bytes
    version: int = VERSION

    def to_bytes(self) -> bytes:
        c, h, w = self.dims
        return _HEADER.pack(MAGIC, self.version, self.mode, c, h, w, self.checksum) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < HEADER_SIZE:
            raise BitstreamError(f"bitstream shorter than header ({len(data)} < {HEADER_SIZE} bytes)")
        magic, version, mode, c, h, w, checksum = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise BitstreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise BitstreamError(f"unsupported version {version}")
        if mode not in (MODE_IMPLICIT, MODE_EXPLICIT):
            raise BitstreamError(f"unknown mode flag {mode}")
        return cls((c, h, w), mode, checksum, bytes(data[HEADER_SIZE:]), version)

    @property
    def payload_bits(self) -> int:
        return 8 * len(self.payload)


def symbols_checksum(symbols: np.ndarray) -> int:
    return zlib.crc32(np.ascontiguousarray(symbols, dtype="<i4").tobytes()) & 0xFFFFFFFF


# -- explicit mask signalling: LEB128 run lengths, alternating, first run is skips


def _varint(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    shift = 0
    value = 0
    while True:
        if pos >= len(buf):
            raise BitstreamError("truncated varint")
        b = buf[pos]
        pos += 1
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise BitstreamError("varint overflow")


def encode_mask_runs(mask: np.ndarray) -> bytes:
    flat = np.asarray(mask, dtype=np.uint8).ravel()
    out = bytearray()
    if flat.size == 0:
        return bytes(out)
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs.insert(0, 0)
    for r in runs:
        out += _varint(int(r))
    return bytes(out)


def decode_mask_runs(buf: bytes, dims) -> np.ndarray:
    n = int(np.prod(dims))
    flat = np.zeros(n, dtype=np.uint8)
    pos = 0
    at = 0
    value = 0
    while pos < len(buf):
        run, pos = _read_varint(buf, pos)
        if at + run > n:
            raise BitstreamError("mask runs exceed tensor size")
        flat[at:at + run] = value
        at += run
        value ^= 1
    if at != n:
        raise BitstreamError(f"mask runs cover {at} of {n} elements")
    return flat.reshape(dims)


def mask_signaling_bits(mask) -> int:
    """Bits an explicit-mode stream spends on the mask (length prefix included)."""
    runs = encode_mask_runs(mask)
    return 8 * (len(_varint(len(runs))) + len(runs))


def _flat_inputs(prior: GaussianPrior, mask: np.ndarray):
    return (
        np.ascontiguousarray(prior.mean.ravel()),
        np.ascontiguousarray(prior.scale.ravel()),
        np.ascontiguousarray(mask.ravel()),
    )


def encode_tensor(latent, prior: GaussianPrior, mask, mode: int = MODE_IMPLICIT) -> Bitstream:
    """Range-code the kept elements of a ``(c, h, w)`` latent.

    Skipped elements cost nothing; in explicit mode the mask itself is
    prepended to the payload.
    """
    latent = np.asarray(latent)
    if latent.ndim != 3:
        raise InputDataError(f"latent must be (c, h, w), got shape {latent.shape}")
    if not np.issubdtype(latent.dtype, np.integer):
        raise InputDataError("latent must hold integer symbols; quantize first")
    mask = as_mask(mask)
    check_dims(latent, prior, mask)
    if latent.size and (latent.min() < SYMBOL_MIN or latent.max() > SYMBOL_MAX):
        raise InputDataError("latent symbols outside the 16-bit alphabet")
    if mode not in (MODE_IMPLICIT, MODE_EXPLICIT):
        raise InputDataError(f"unknown mode {mode}")

    symbols = np.ascontiguousarray(latent.ravel(), dtype=np.int32)
    means, scales, keep = _flat_inputs(prior, mask)
    coded = rc.encode_symbols(symbols, means, scales, keep).tobytes()

    reconstructed = np.where(keep.astype(bool), symbols, center_symbols(means))
    payload = coded
    if mode == MODE_EXPLICIT:
        runs = encode_mask_runs(mask)
        payload = _varint(len(runs)) + runs + coded
    return Bitstream(tuple(int(d) for d in latent.shape), mode, symbols_checksum(reconstructed), payload)


def read_explicit_mask(bs: Bitstream) -> tuple[np.ndarray, bytes]:
    n_runs, pos = _read_varint(bs.payload, 0)
    if pos + n_runs > len(bs.payload):
        raise BitstreamError("truncated mask section")
    mask = decode_mask_runs(bs.payload[pos:pos + n_runs], bs.dims)
    return mask, bs.payload[pos + n_runs:]


def decode_tensor(bs: Bitstream, prior: GaussianPrior, mask=None) -> np.ndarray:
    """Decode to an int32 ``(c, h, w)`` latent.

    Implicit streams need the mask the decoder recomputed from the prior.
    Explicit streams carry their own; a mask passed alongside must agree.
    Skipped elements decode to the rounded prior mean.
    """
    if tuple(bs.dims) != tuple(prior.dims):
        raise BitstreamError(f"header dims {bs.dims} != prior dims {prior.dims}")
    coded = bs.payload
    if bs.mode == MODE_EXPLICIT:
        stream_mask, coded = read_explicit_mask(bs)
        if mask is not None and not np.array_equal(as_mask(mask, bs.dims), stream_mask):
            raise BitstreamError("supplied mask disagrees with the mask carried in the stream")
        mask = stream_mask
    elif mask is None:
        raise InputDataError("implicit-mode stream needs the decoder-side mask")
    mask = as_mask(mask, bs.dims)

    means, scales, keep = _flat_inputs(prior, mask)
    symbols = center_symbols(means)
    status = rc.decode_symbols(np.frombuffer(coded, dtype=np.uint8), means, scales, keep, symbols)
    if status != rc.OK:
        raise BitstreamError(f"corrupt payload (range decoder status {status})")
    if symbols_checksum(symbols) != bs.checksum:
        raise BitstreamError("checksum mismatch: payload corrupted or truncated")
    return symbols.reshape(bs.dims)
