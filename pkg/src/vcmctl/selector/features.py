"""Pre-analysis: masked optical-flow statistics and motion priors per GoP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputDataError

N_FEATURES = 8
FEATURE_NAMES = (
    "masked_flow_mean",
    "masked_flow_std",
    "box_coverage",
    "prior_mean",
    "prior_var",
    "det_confidence",
    "frame_count",
    "bias",
)
FRAME_COUNT_NORM = 32.0


@dataclass(frozen=True)
class FlowStats:
    """Magnitude statistics of box-masked flow for one frame.

    ``mean`` and ``m2`` (sum of squared deviations) are over the ``count``
    masked pixels; ``pixels`` is the frame size.
    """

    count: int
    mean: float
    m2: float
    pixels: int

    @classmethod
    def empty(cls, pixels: int) -> "FlowStats":
        return cls(0, 0.0, 0.0, pixels)


@dataclass(frozen=True)
class FrameAnalysis:
    flow: FlowStats
    confidences: tuple[float, ...] = ()
    prior_mean: float = 0.0
    prior_var: float = 0.0


@dataclass(frozen=True)
class PreAnalysisInput:
    """Everything the selector sees about one GoP's predicted frames."""

    frames: tuple[FrameAnalysis, ...]
    width: int
    height: int
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def n_predicted(self) -> int:
        return len(self.frames)


def box_mask(boxes, width: int, height: int) -> np.ndarray:
    """Union of boxes ``[x0, y0, x1, y1, conf]`` as a pixel mask.

    A pixel is covered when its centre lies inside a half-open box.
    """
    mask = np.zeros((height, width), dtype=bool)
    xc = np.arange(width) + 0.5
    yc = np.arange(height) + 0.5
    for box in validate_boxes(boxes, width, height):
        x0, y0, x1, y1 = box[:4]
        cols = (xc >= x0) & (xc < x1)
        rows = (yc >= y0) & (yc < y1)
        mask |= rows[:, None] & cols[None, :]
    return mask


def validate_boxes(boxes, width: int, height: int) -> np.ndarray:
    arr = np.asarray(boxes, dtype=np.float64).reshape(-1, 5) if len(boxes) else np.zeros((0, 5))
    if arr.size:
        x0, y0, x1, y1, conf = arr.T
        if np.any(x0 < 0) or np.any(y0 < 0) or np.any(x1 > width) or np.any(y1 > height):
            raise InputDataError(f"box outside the {width}x{height} frame")
        if np.any(x1 < x0) or np.any(y1 < y0):
            raise InputDataError("box corners out of order")
        if np.any(conf < 0) or np.any(conf > 1):
            raise InputDataError("box confidence outside [0, 1]")
    return arr


def flow_stats(flow, boxes, width: int, height: int) -> FlowStats:
    flow = np.asarray(flow, dtype=np.float64)
    if flow.shape != (2, height, width):
        raise InputDataError(f"flow shape {flow.shape} != (2, {height}, {width})")
    mask = box_mask(boxes, width, height)
    count = int(mask.sum())
    if count == 0:
        return FlowStats.empty(width * height)
    mag = np.hypot(flow[0], flow[1])[mask]
    mean = float(mag.mean())
    return FlowStats(count, mean, float(np.sum((mag - mean) ** 2)), width * height)


def analyze_frame(flow, boxes, width, height, prior_mean=0.0, prior_var=0.0) -> FrameAnalysis:
    arr = validate_boxes(boxes, width, height)
    return FrameAnalysis(
        flow_stats(flow, arr, width, height),
        tuple(float(c) for c in arr[:, 4]),
        float(prior_mean),
        float(prior_var),
    )


def _merge(a: tuple[int, float, float], s: FlowStats) -> tuple[int, float, float]:
    n_a, mean_a, m2_a = a
    if s.count == 0:
        return a
    n = n_a + s.count
    delta = s.mean - mean_a
    mean = mean_a + delta * s.count / n
    m2 = m2_a + s.m2 + delta * delta * n_a * s.count / n
    return n, mean, m2


def aggregate_features(inp: PreAnalysisInput) -> np.ndarray:
    """The selector's 8-vector; order given by ``FEATURE_NAMES``."""
    if not inp.frames:
        raise InputDataError("pre-analysis needs at least one predicted frame")
    acc = (0, 0.0, 0.0)
    pixels = 0
    for fr in inp.frames:
        if fr.flow.pixels != inp.width * inp.height:
            raise InputDataError(f"flow statistics cover {fr.flow.pixels} pixels, frame has {inp.width * inp.height}")
        acc = _merge(acc, fr.flow)
        pixels += fr.flow.pixels
    count, mean, m2 = acc
    std = float(np.sqrt(max(m2, 0.0) / count)) if count else 0.0
    confs = [c for fr in inp.frames for c in fr.confidences]
    feats = np.array(
        [
            mean if count else 0.0,
            std,
            count / pixels,
            float(np.mean([fr.prior_mean for fr in inp.frames])),
            float(np.mean([fr.prior_var for fr in inp.frames])),
            float(np.mean(confs)) if confs else 0.0,
            len(inp.frames) / FRAME_COUNT_NORM,
            1.0,
        ]
    )
    if not np.all(np.isfinite(feats)):
        raise InputDataError("non-finite pre-analysis features")
    return feats
