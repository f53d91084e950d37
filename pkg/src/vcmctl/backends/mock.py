"""Analytic stand-in codec: costs linear in motion accumulated since the reference."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InputDataError
from ..gop import FrameType
from .base import Backend, BackendState, EncodeOutcome

PR_KAPPA_FACTOR = 1.5


@dataclass(frozen=True)
class MockParams:
    b_I: float = 10.0
    b_P: float = 1.0
    b_m: float = 0.1
    gamma: float = 0.0
    l_P: float = 0.2
    kappa: float = 1.0
    motion: tuple[float, ...] = field(default=())
    width: int = 64
    height: int = 64

    def __post_init__(self):
        motion = tuple(float(m) for m in self.motion)
        if any(m < 0 or not np.isfinite(m) for m in motion):
            raise InputDataError("motion intensities must be finite and >= 0")
        if self.kappa < 0:
            raise InputDataError("kappa must be >= 0")
        object.__setattr__(self, "motion", motion)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["motion"] = list(self.motion)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MockParams":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InputDataError(f"unknown mock parameters: {sorted(unknown)}")
        return cls(**d)


def _costs(params: MockParams, accumulated: float, ftype: FrameType) -> tuple[float, float]:
    if ftype is FrameType.I:
        return params.b_I, params.l_P
    if ftype is FrameType.P:
        return params.b_P + params.gamma * accumulated, params.l_P
    if ftype is FrameType.Pm:
        return params.b_m, params.l_P + params.kappa * accumulated
    return 0.0, params.l_P + PR_KAPPA_FACTOR * params.kappa * accumulated


def mock_encode(state: BackendState, t: int, ftype, params: MockParams) -> EncodeOutcome:
    """Reference implementation of the mock cost model, one frame at a time."""
    return MockBackend(params).encode(state, t, ftype)


class MockBackend(Backend):
    def __init__(self, params: MockParams):
        self.params = params
        self.width = params.width
        self.height = params.height
        # prefix[k] = motion[0] + ... + motion[k-1]
        self._prefix = np.concatenate(([0.0], np.cumsum(params.motion))).tolist()

    def accumulated_motion(self, ref: int, t: int) -> float:
        if t >= len(self._prefix):
            raise InputDataError(f"mock motion has {len(self._prefix) - 1} frames, frame {t} requested")
        return self._prefix[t + 1] - self._prefix[ref + 1]

    def _encode(self, state, t, ftype):
        if ftype is FrameType.I:
            return _costs(self.params, 0.0, ftype)
        return _costs(self.params, self.accumulated_motion(state.ref_index, t), ftype)

    def __repr__(self) -> str:
        return f"MockBackend({self.params!r})"
