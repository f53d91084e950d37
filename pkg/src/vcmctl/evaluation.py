"""Bits per pixel, rate-metric curves and Bjontegaard delta rate."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InputDataError

SIMPSON_INTERVALS = 1000
MIN_POINTS = 4


def bpp(total_bits: float, width: int, height: int, frame_count: int) -> float:
    denom = width * height * frame_count
    if width <= 0 or height <= 0 or frame_count <= 0:
        raise ValueError(f"bpp needs positive dims and frame count, got {width}x{height}x{frame_count}")
    return total_bits / denom


@dataclass(frozen=True)
class RateMetricCurve:
    bpp: tuple[float, ...]
    metric: tuple[float, ...]

    def __post_init__(self):
        if len(self.bpp) != len(self.metric):
            raise InputDataError("bpp and metric columns differ in length")
        order = np.argsort(self.bpp, kind="stable")
        b = tuple(float(self.bpp[i]) for i in order)
        m = tuple(float(self.metric[i]) for i in order)
        if any(x <= 0 or not math.isfinite(x) for x in b):
            raise InputDataError("bpp values must be finite and > 0")
        if any(not math.isfinite(x) for x in m):
            raise InputDataError("metric values must be finite")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise InputDataError("bpp values must be distinct")
        object.__setattr__(self, "bpp", b)
        object.__setattr__(self, "metric", m)

    @classmethod
    def from_points(cls, points) -> "RateMetricCurve":
        points = list(points)
        return cls(tuple(p[0] for p in points), tuple(p[1] for p in points))

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.bpp, self.metric))

    def __len__(self) -> int:
        return len(self.bpp)


@dataclass(frozen=True)
class BdRateResult:
    percent: float
    overlap: tuple[float, float]


def _simpson(f, lo: float, hi: float, n: int = SIMPSON_INTERVALS) -> float:
    x = np.linspace(lo, hi, n + 1)
    y = f(x)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((hi - lo) / (3 * n) * np.dot(w, y))


def _log_rate_fn(curve: RateMetricCurve, classical: bool):
    m = np.asarray(curve.metric)
    r = np.log10(np.asarray(curve.bpp))
    if classical:
        coeffs = np.polyfit(m, r, 3)
        return lambda x: np.polyval(coeffs, x)
    order = np.argsort(m, kind="stable")
    m, r = m[order], r[order]
    if np.any(np.diff(m) <= 0):
        raise InputDataError("piecewise BD-rate needs distinct metric values")
    return PchipInterpolator(m, r, extrapolate=False)


def bd_rate(anchor: RateMetricCurve, test: RateMetricCurve, classical: bool = False) -> BdRateResult:
    """Average rate difference of ``test`` vs ``anchor`` at equal metric, in percent.

    log10(bpp) is interpolated as a function of the metric (monotone
    piecewise cubic, or a cubic polynomial fit with ``classical=True``) and
    integrated with Simpson's rule over the overlapping metric range.
    Negative means ``test`` needs fewer bits.
    """
    for name, c in (("anchor", anchor), ("test", test)):
        if len(c) < MIN_POINTS:
            raise InputDataError(f"{name} curve has {len(c)} points; BD-rate needs at least {MIN_POINTS}")
    lo = max(min(anchor.metric), min(test.metric))
    hi = min(max(anchor.metric), max(test.metric))
    if not hi > lo:
        raise InputDataError(f"metric ranges do not overlap ([{lo}, {hi}])")
    fa = _log_rate_fn(anchor, classical)
    ft = _log_rate_fn(test, classical)
    diff = (_simpson(ft, lo, hi) - _simpson(fa, lo, hi)) / (hi - lo)
    return BdRateResult(float((10.0**diff - 1.0) * 100.0), (lo, hi))


def curve_point(outcomes, width: int, height: int, metric=None) -> tuple[float, float]:
    """``(bpp, metric)`` for one run of encoded frames.

    Without an explicit metric the negated mean task loss stands in, so that
    higher is better as for accuracy metrics.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("a run needs at least one frame")
    total = sum(o.bits for o in outcomes)
    m = -float(np.mean([o.task_loss for o in outcomes])) if metric is None else float(metric)
    return bpp(total, width, height, len(outcomes)), m


def curve_from_runs(runs, width: int, height: int) -> RateMetricCurve:
    return RateMetricCurve.from_points(curve_point(r, width, height) for r in runs)


def read_curve_csv(path) -> RateMetricCurve:
    points = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["bpp", "metric"]:
            raise InputDataError(f"{path}:1: expected header 'bpp,metric'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InputDataError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                points.append((float(row[0]), float(row[1])))
            except ValueError:
                raise InputDataError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
    try:
        return RateMetricCurve.from_points(points)
    except InputDataError as exc:
        raise InputDataError(f"{path}: {exc}") from None


def write_curve_csv(path, curve: RateMetricCurve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bpp", "metric"])
        for b, m in curve.points:
            w.writerow([repr(b), repr(m)])


def write_plot_data(path, curve: RateMetricCurve) -> None:
    lines = ["# bpp metric"] + [f"{b!r} {m!r}" for b, m in curve.points]
    Path(path).write_text("\n".join(lines) + "\n")
