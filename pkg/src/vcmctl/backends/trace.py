"""Replay of measured per-frame costs keyed by (frame, reference, type)."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import BackendError, InputDataError
from ..gop import FrameType
from .base import Backend


class TraceBackend(Backend):
    def __init__(self, entries: dict[tuple[int, int, FrameType], tuple[float, float]], width: int, height: int):
        self.entries = dict(entries)
        self.width = int(width)
        self.height = int(height)
        self.supports_pr = any(k[2] is FrameType.Pr for k in self.entries)

    def _encode(self, state, t, ftype):
        key = (t, state.ref_index, ftype)
        try:
            return self.entries[key]
        except KeyError:
            raise BackendError(f"trace has no entry for frame t={t} ref={state.ref_index} type={ftype.value}") from None

    def to_json(self) -> dict:
        frames = [
            {"t": t, "ref": ref, "type": ftype.value, "bits": bits, "loss": loss}
            for (t, ref, ftype), (bits, loss) in sorted(self.entries.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value))
        ]
        return {"width": self.width, "height": self.height, "frames": frames}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def from_json(cls, doc: dict, source: str = "<trace>") -> "TraceBackend":
        try:
            entries = {}
            for i, fr in enumerate(doc["frames"]):
                try:
                    key = (int(fr["t"]), int(fr["ref"]), FrameType(fr["type"]))
                    entries[key] = (float(fr["bits"]), float(fr["loss"]))
                except (KeyError, ValueError, TypeError) as exc:
                    raise InputDataError(f"{source}: frame entry {i} malformed: {exc}") from None
            return cls(entries, int(doc["width"]), int(doc["height"]))
        except (KeyError, TypeError) as exc:
            raise InputDataError(f"{source}: not a trace document ({exc})") from None

    @classmethod
    def load(cls, path) -> "TraceBackend":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InputDataError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        return cls.from_json(doc, str(path))


def trace_encode(state, t, ftype, trace: TraceBackend):
    return trace.encode(state, t, ftype)


def export_trace(backend: Backend, n: int, include_pr: bool = False) -> TraceBackend:
    """Tabulate every (frame, reference, type) a GoP of ``n`` frames can reach."""
    from .base import BackendState

    types = [FrameType.P, FrameType.Pm] + ([FrameType.Pr] if include_pr else [])
    entries = {}
    out = backend.encode(BackendState(-1), 0, FrameType.I)
    entries[(0, -1, FrameType.I)] = (out.bits, out.task_loss)
    for t in range(1, n):
        for ref in range(t):
            for ftype in types:
                o = backend.encode(BackendState(ref), t, ftype)
                entries[(t, ref, ftype)] = (o.bits, o.task_loss)
    return TraceBackend(entries, backend.width, backend.height)
