"""Pre-analysis inputs from files.

Flow manifest (JSON sidecar)::

    {"width": W, "height": H, "frames": N, "flow": "flow.f32",
     "prior_mean": [...], "prior_var": [...]}

``flow`` is raw planar little-endian float32, ``2 x H x W`` per predicted
frame, x component first; relative paths resolve against the manifest.
The prior lists are optional (default 0). Boxes file: a JSON list with one
``{"boxes": [[x0, y0, x1, y1, conf], ...]}`` object per predicted frame.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import InputDataError
from .features import PreAnalysisInput, analyze_frame
from .flow import block_matching_flow


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputDataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None


def read_flow_manifest(path):
    doc = _read_json(path)
    try:
        w, h, n = int(doc["width"]), int(doc["height"]), int(doc["frames"])
        flow_path = Path(path).parent / doc["flow"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputDataError(f"{path}: flow manifest missing or bad field ({exc})") from None
    raw = np.fromfile(flow_path, dtype="<f4")
    if raw.size != n * 2 * h * w:
        raise InputDataError(f"{flow_path}: expected {n * 2 * h * w} float32 values, found {raw.size}")
    flows = raw.astype(np.float64).reshape(n, 2, h, w)
    prior_mean = doc.get("prior_mean", [0.0] * n)
    prior_var = doc.get("prior_var", [0.0] * n)
    if len(prior_mean) != n or len(prior_var) != n:
        raise InputDataError(f"{path}: prior lists must have one entry per frame ({n})")
    return flows, w, h, prior_mean, prior_var


def write_flow_manifest(path, flows, prior_mean=None, prior_var=None) -> None:
    flows = np.asarray(flows, dtype="<f4")
    n, _, h, w = flows.shape
    path = Path(path)
    flow_name = path.with_suffix(".f32").name
    flows.tofile(path.parent / flow_name)
    doc = {"width": w, "height": h, "frames": n, "flow": flow_name}
    if prior_mean is not None:
        doc["prior_mean"] = [float(v) for v in prior_mean]
    if prior_var is not None:
        doc["prior_var"] = [float(v) for v in prior_var]
    path.write_text(json.dumps(doc, indent=1) + "\n")


def read_boxes(path, n_frames: int):
    doc = _read_json(path)
    if not isinstance(doc, list) or len(doc) != n_frames:
        raise InputDataError(f"{path}: expected a list of {n_frames} per-frame box objects")
    out = []
    for i, fr in enumerate(doc):
        if not isinstance(fr, dict) or "boxes" not in fr:
            raise InputDataError(f"{path}: frame {i} lacks a 'boxes' list")
        out.append(fr["boxes"])
    return out


def read_luma(path, width: int, height: int) -> np.ndarray:
    """Raw 8-bit luma frames, concatenated."""
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % (width * height):
        raise InputDataError(f"{path}: size {raw.size} is not a whole number of {width}x{height} frames")
    return raw.reshape(-1, height, width)


def preanalysis_from_files(flow_manifest=None, boxes=None, luma=None, width=None, height=None) -> PreAnalysisInput:
    """Build the selector input from a flow manifest or, failing that, raw luma."""
    if flow_manifest is not None:
        flows, w, h, pm, pv = read_flow_manifest(flow_manifest)
    elif luma is not None:
        if not width or not height:
            raise InputDataError("raw luma input needs --width and --height")
        frames = read_luma(luma, width, height)
        if len(frames) < 2:
            raise InputDataError("block matching needs at least two frames")
        flows = np.stack([block_matching_flow(a, b) for a, b in zip(frames[:-1], frames[1:])])
        w, h = width, height
        mags = np.hypot(flows[:, 0], flows[:, 1])
        pm, pv = mags.mean(axis=(1, 2)).tolist(), mags.var(axis=(1, 2)).tolist()
    else:
        raise InputDataError("pre-analysis needs a flow manifest or raw luma frames")
    n = len(flows)
    box_lists = read_boxes(boxes, n) if boxes is not None else [[]] * n
    frames_out = tuple(analyze_frame(flows[i], box_lists[i], w, h, pm[i], pv[i]) for i in range(n))
    return PreAnalysisInput(frames_out, w, h, {})
