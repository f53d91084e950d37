"""Two-logit affine scorer and structure materialization."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..errors import InputDataError
from ..gop import FrameType, GopStructure
from .features import N_FEATURES, PreAnalysisInput, aggregate_features

# row 0 scores P, row 1 scores Pm


def zero_weights() -> np.ndarray:
    return np.zeros((2, N_FEATURES))


def score(features, weights) -> np.ndarray:
    """``(p_P, p_Pm)`` = softmax of the two affine logits."""
    z = np.asarray(weights, dtype=np.float64) @ np.asarray(features, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def materialize(p_P: float, length: int) -> tuple[int, ...]:
    """Spread ``round_half_up(p_P * length)`` ones as evenly as possible.

    Position ``i`` is 1 iff ``floor((i+1) k / L) > floor(i k / L)``, which puts
    each 1 at the end of its run, so the last position is a P frame whenever
    any are.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    k = min(length, max(0, math.floor(float(p_P) * length + 0.5)))
    return tuple(int((i + 1) * k // length > i * k // length) for i in range(length))


def split_mini_gops(gop_size: int, mini_size: int) -> list[int]:
    """Predicted-vector length of each mini GoP.

    The first mini GoP starts with the I frame; every later one starts with
    a forced P frame, so each vector has ``mini_size - 1`` entries.
    """
    if mini_size < 2 or gop_size < 1 or gop_size % mini_size:
        raise ValueError(f"GoP size {gop_size} is not a multiple of mini-GoP size {mini_size}")
    return [mini_size - 1] * (gop_size // mini_size)


def assemble(vectors, mini_size: int) -> GopStructure:
    frames = [FrameType.I]
    for i, vec in enumerate(vectors):
        if len(vec) != mini_size - 1:
            raise ValueError(f"mini-GoP vector {i} has length {len(vec)}, expected {mini_size - 1}")
        if i:
            frames.append(FrameType.P)
        frames.extend(FrameType.P if b else FrameType.Pm for b in vec)
    return GopStructure(tuple(frames))


def select_structure(p_P: float, gop_size: int, mini_size: int | None = None) -> GopStructure:
    mini = mini_size or gop_size
    return assemble([materialize(p_P, n) for n in split_mini_gops(gop_size, mini)], mini)


def predict(inp: PreAnalysisInput, weights, mini_size: int | None = None) -> tuple[np.ndarray, GopStructure]:
    s = score(aggregate_features(inp), weights)
    return s, select_structure(s[0], inp.n_predicted + 1, mini_size)


def save_weights(path, weights) -> None:
    w = np.asarray(weights, dtype=np.float64)
    Path(path).write_text(json.dumps(w.tolist()) + "\n")


def load_weights(path) -> np.ndarray:
    try:
        w = np.asarray(json.loads(Path(path).read_text()), dtype=np.float64)
    except (json.JSONDecodeError, ValueError) as exc:
        raise InputDataError(f"{path}: not a weights file ({exc})") from None
    if w.shape != (2, N_FEATURES) or not np.all(np.isfinite(w)):
        raise InputDataError(f"{path}: expected a finite 2x{N_FEATURES} array, got shape {w.shape}")
    return w
