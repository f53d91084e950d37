"""Synthetic GoPs whose best structure depends on how much they move.

Each sequence pairs a mock backend (Pm degradation grows with motion since
the last I/P frame) with a pre-analysis input rendered from the same motion:
a box of uniform flow whose magnitude tracks the per-frame motion.
"""

from __future__ import annotations

import numpy as np

from ..backends.mock import MockBackend, MockParams
from .features import PreAnalysisInput, analyze_frame

HIGH_MOTION = (1.0, 2.0)
STATIC = (0.0, 0.1)
FLOW_GAIN = 3.0


def render_preanalysis(motion, rng: np.random.Generator, size: int = 32) -> PreAnalysisInput:
    """Pre-analysis for frames ``1..len(motion)-1`` of a motion profile."""
    frames = []
    for t in range(1, len(motion)):
        bw, bh = rng.integers(size // 4, size // 2 + 1, 2)
        x0 = int(rng.integers(0, size - bw + 1))
        y0 = int(rng.integers(0, size - bh + 1))
        conf = float(rng.uniform(0.5, 0.95))
        angle = rng.uniform(0, 2 * np.pi)
        flow = rng.normal(0.0, 0.05, (2, size, size))
        speed = FLOW_GAIN * motion[t]
        flow[0, y0:y0 + bh, x0:x0 + bw] += speed * np.cos(angle)
        flow[1, y0:y0 + bh, x0:x0 + bw] += speed * np.sin(angle)
        frames.append(
            analyze_frame(
                flow,
                [[x0, y0, x0 + bw, y0 + bh, conf]],
                size,
                size,
                prior_mean=motion[t] + rng.normal(0.0, 0.05),
                prior_var=0.5 * motion[t] + 0.01,
            )
        )
    return PreAnalysisInput(tuple(frames), size, size, {})


def make_sequence(
    rng: np.random.Generator,
    high_motion: bool,
    n_predicted: int = 9,
    size: int = 32,
    kappa: float = 0.5,
    gamma: float = 0.05,
) -> tuple[PreAnalysisInput, MockBackend]:
    lo, hi = HIGH_MOTION if high_motion else STATIC
    level = rng.uniform(lo, hi)
    motion = np.concatenate(([0.0], level * rng.uniform(0.8, 1.2, n_predicted)))
    params = MockParams(
        b_I=10.0, b_P=1.0, b_m=0.1, gamma=gamma, l_P=0.2, kappa=kappa,
        motion=tuple(motion), width=size, height=size,
    )

    inp = render_preanalysis(motion, rng, size)
    inp.extra.update(high_motion=bool(high_motion), level=float(level))
    return inp, MockBackend(params)


def make_dataset(count: int, seed, n_predicted: int = 9, **kwargs):
    """``count`` sequences, alternating high-motion and static."""
    rng = np.random.default_rng(seed)
    return [make_sequence(rng, i % 2 == 0, n_predicted, **kwargs) for i in range(count)]
