"""Explicit-state codec backend contract.

A backend never holds the reference buffer itself: callers pass a
:class:`BackendState` in and get the successor back, so a tree search can
keep many branches alive against one backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from ..errors import BackendError
from ..gop import FrameType


@dataclass(frozen=True)
class BackendState:
    ref_index: int = -1
    extra: Any = None


@dataclass(frozen=True)
class EncodeOutcome:
    bits: float
    task_loss: float
    new_state: BackendState


def advance(state: BackendState, t: int, ftype: FrameType) -> BackendState:
    """Reference update rule shared by every backend."""
    if FrameType(ftype).updates_reference:
        return BackendState(t, state.extra)
    return state


class Backend:
    """Base class; subclasses implement :meth:`_encode`."""

    supports_pr: bool = True
    width: int = 64
    height: int = 64

    def initial_state(self) -> BackendState:
        return BackendState(-1)

    def encode(self, state: BackendState, t: int, ftype) -> EncodeOutcome:
        ftype = FrameType(ftype)
        if t <= state.ref_index:
            raise BackendError(f"frame {t} cannot reference frame {state.ref_index}")
        if ftype is FrameType.I and state.ref_index != -1:
            raise BackendError("I frames only start a GoP")
        if ftype is not FrameType.I and state.ref_index < 0:
            raise BackendError(f"predicted frame {t} has no reference")
        if ftype is FrameType.Pr and not self.supports_pr:
            raise BackendError(f"{type(self).__name__} does not support Pr frames")
        bits, loss = self._encode(state, t, ftype)
        return EncodeOutcome(float(bits), float(loss), advance(state, t, ftype))

    def _encode(self, state: BackendState, t: int, ftype: FrameType) -> tuple[float, float]:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
