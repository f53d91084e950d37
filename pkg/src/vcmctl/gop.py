"""Frame types, GoP structures and reference scheduling.

Only I and P frames update the reference; Pm (skip-mode) and Pr (warp-only)
frames predict from the latest I/P frame and leave it in place.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InputDataError


class FrameType(str, enum.Enum):
    I = "I"  # noqa: E741
    P = "P"
    Pm = "Pm"
    Pr = "Pr"

    @property
    def updates_reference(self) -> bool:
        return self in (FrameType.I, FrameType.P)

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class GopStructure:
    frames: tuple[FrameType, ...]

    def __post_init__(self):
        frames = tuple(FrameType(f) for f in self.frames)
        if not frames:
            raise InputDataError("a GoP needs at least one frame")
        if frames[0] is not FrameType.I:
            raise InputDataError("a GoP must start with an I frame")
        if FrameType.I in frames[1:]:
            raise InputDataError("only the first frame of a GoP may be I")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def __str__(self) -> str:
        return ",".join(f.value for f in self.frames)

    @classmethod
    def parse(cls, text: str) -> "GopStructure":
        """Accept ``"I,Pm,P"`` or a binary predicted-frame string like ``"01"``."""
        text = text.strip()
        if text and set(text) <= {"0", "1"}:
            return from_binary([int(c) for c in text], len(text) + 1)
        try:
            return cls(tuple(FrameType(t.strip()) for t in text.split(",")))
        except ValueError as exc:
            raise InputDataError(f"bad GoP structure {text!r}: {exc}") from None

    def to_binary(self) -> tuple[int, ...]:
        return to_binary(self)

    @property
    def binary_string(self) -> str:
        return "".join(map(str, to_binary(self)))

    @property
    def n_pm(self) -> int:
        return sum(f is FrameType.Pm for f in self.frames)


def divgop(n: int) -> GopStructure:
    """Alternating hand-crafted structure ``I, Pm, P, Pm, P, ...``."""
    if n < 1:
        raise ValueError(f"GoP size must be >= 1, got {n}")
    return GopStructure((FrameType.I,) + tuple(FrameType.Pm if t % 2 else FrameType.P for t in range(1, n)))


def all_p(n: int) -> GopStructure:
    if n < 1:
        raise ValueError(f"GoP size must be >= 1, got {n}")
    return GopStructure((FrameType.I,) + (FrameType.P,) * (n - 1))


def to_binary(structure: GopStructure) -> tuple[int, ...]:
    """1 for P, 0 for Pm, one entry per predicted frame."""
    bits = []
    for f in structure.frames[1:]:
        if f is FrameType.Pr:
            raise ValueError("Pr frames have no binary encoding")
        bits.append(1 if f is FrameType.P else 0)
    return tuple(bits)


def from_binary(bits: Iterable[int], n: int | None = None) -> GopStructure:
    bits = tuple(int(b) for b in bits)
    if n is not None and len(bits) != n - 1:
        raise InputDataError(f"binary vector of length {len(bits)} does not describe a GoP of {n} frames")
    if any(b not in (0, 1) for b in bits):
        raise InputDataError("binary GoP vectors hold only 0 and 1")
    return GopStructure((FrameType.I,) + tuple(FrameType.P if b else FrameType.Pm for b in bits))


def reference_schedule(structure: GopStructure | Sequence[FrameType]) -> tuple[int, ...]:
    frames = structure.frames if isinstance(structure, GopStructure) else tuple(structure)
    refs = []
    last = -1
    for t, f in enumerate(frames):
        refs.append(-1 if f is FrameType.I else last)
        if f.updates_reference:
            last = t
    return tuple(refs)
