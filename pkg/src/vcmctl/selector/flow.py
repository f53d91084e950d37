"""Block-matching motion estimation for self-contained demos.

Exhaustive SAD search on integer-rounded luma: 16x16 blocks, +-8 pixels.
The returned flow maps previous-frame pixels to current-frame pixels, one
vector per block broadcast over the block. Ties prefer zero motion, then the
first candidate in (dy, dx) raster order.
"""

import numpy as np

from .._accel import NUMBA_ENABLED, njit

BLOCK = 16
RADIUS = 8


@njit
def _block_match_kernel(prev, cur, block, radius, out_dy, out_dx):
    h, w = cur.shape
    nby = out_dy.shape[0]
    nbx = out_dy.shape[1]
    for by in range(nby):
        y0 = by * block
        y1 = min(y0 + block, h)
        for bx in range(nbx):
            x0 = bx * block
            x1 = min(x0 + block, w)
            best = 0
            for y in range(y0, y1):
                for x in range(x0, x1):
                    best += abs(cur[y, x] - prev[y, x])
            best_dy = 0
            best_dx = 0
            for dy in range(-radius, radius + 1):
                if y0 + dy < 0 or y1 + dy > h:
                    continue
                for dx in range(-radius, radius + 1):
                    if x0 + dx < 0 or x1 + dx > w:
                        continue
                    if dy == 0 and dx == 0:
                        continue
                    sad = 0
                    for y in range(y0, y1):
                        for x in range(x0, x1):
                            sad += abs(cur[y, x] - prev[y + dy, x + dx])
                        if sad >= best:
                            break
                    if sad < best:
                        best = sad
                        best_dy = dy
                        best_dx = dx
            out_dy[by, bx] = best_dy
            out_dx[by, bx] = best_dx


def _block_match_numpy(prev, cur, block, radius, out_dy, out_dx):
    h, w = cur.shape
    nby, nbx = out_dy.shape
    row_starts = np.arange(nby) * block
    col_starts = np.arange(nbx) * block
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    best = np.full((nby, nbx), np.iinfo(np.int64).max, dtype=np.int64)
    # zero displacement first so it wins ties
    candidates = [(0, 0)] + [
        (dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1) if (dy, dx) != (0, 0)
    ]
    for dy, dx in candidates:
        sy = ys + dy
        sx = xs + dx
        valid = (sy >= 0) & (sy < h) & (sx >= 0) & (sx < w)
        shifted = prev[np.clip(sy, 0, h - 1), np.clip(sx, 0, w - 1)]
        diff = np.abs(cur - shifted)
        sad = np.add.reduceat(np.add.reduceat(diff, row_starts, axis=0), col_starts, axis=1)
        invalid = np.add.reduceat(np.add.reduceat((~valid).astype(np.int64), row_starts, axis=0), col_starts, axis=1)
        better = (invalid == 0) & (sad < best)
        best = np.where(better, sad, best)
        out_dy[better] = dy
        out_dx[better] = dx


def block_matching_flow(prev, cur, block: int = BLOCK, radius: int = RADIUS, use_numba: bool | None = None) -> np.ndarray:
    """Estimate a ``(2, h, w)`` flow field (x component first)."""
    prev = np.rint(np.asarray(prev, dtype=np.float64)).astype(np.int64)
    cur = np.rint(np.asarray(cur, dtype=np.float64)).astype(np.int64)
    if prev.shape != cur.shape or prev.ndim != 2:
        raise ValueError(f"frames must be equal-shape 2-D arrays, got {prev.shape} and {cur.shape}")
    h, w = cur.shape
    nby = -(-h // block)
    nbx = -(-w // block)
    dy = np.zeros((nby, nbx), dtype=np.int64)
    dx = np.zeros((nby, nbx), dtype=np.int64)
    if use_numba is None:
        use_numba = NUMBA_ENABLED
    if use_numba:
        _block_match_kernel(prev, cur, block, radius, dy, dx)
    else:
        _block_match_numpy(prev, cur, block, radius, dy, dx)
    # a block that matched prev at +d moved by -d
    flow = np.empty((2, h, w), dtype=np.float64)
    flow[0] = -np.repeat(np.repeat(dx, block, axis=0), block, axis=1)[:h, :w]
    flow[1] = -np.repeat(np.repeat(dy, block, axis=0), block, axis=1)[:h, :w]
    return flow
