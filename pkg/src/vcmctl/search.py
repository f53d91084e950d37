"""GoP structure search under the GoP-average rate + task-loss objective.

Candidates fix the leading I frame and choose P (1) or Pm (0) for each
predicted frame. The I frame is identical for every candidate and is left out
of the objective.

Ties are broken toward more Pm frames, then toward the lexicographically
smallest binary vector. Both exhaustive methods visit candidates in
lexicographic order, so they agree exactly, including on ties.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .backends.base import Backend, EncodeOutcome
from .gop import FrameType, GopStructure, from_binary, reference_schedule

MAX_EXHAUSTIVE_N = 22

_TYPES = (FrameType.Pm, FrameType.P)


@dataclass
class SearchResult:
    structure: GopStructure
    objective: float
    per_frame: list[EncodeOutcome]
    leaves_visited: int
    wall_time: float = field(default=0.0, compare=False)

    def to_report(self, lam: float) -> dict:
        refs = reference_schedule(self.structure)
        return {
            "structure": str(self.structure),
            "binary": self.structure.binary_string,
            "gop_size": len(self.structure),
            "lambda": lam,
            "objective": self.objective,
            "leaves_visited": self.leaves_visited,
            "per_frame": [
                {"t": t, "type": self.structure[t].value, "ref": refs[t], "bits": o.bits, "loss": o.task_loss}
                for t, o in enumerate(self.per_frame, start=1)
            ],
            "wall_time_s": self.wall_time,
        }


def objective(outcomes, lam: float) -> float:
    """Mean bits plus ``lam`` times mean task loss over predicted frames."""
    k = len(outcomes)
    if k == 0:
        raise ValueError("objective needs at least one predicted frame")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    bits = 0.0
    loss = 0.0
    for o in outcomes:
        bits += o.bits
        loss += o.task_loss
    return bits / k + lam * (loss / k)


def rollout(backend: Backend, structure: GopStructure) -> list[EncodeOutcome]:
    """Encode a whole GoP; returns outcomes for the predicted frames only."""
    state = backend.initial_state()
    state = backend.encode(state, 0, FrameType.I).new_state
    outs = []
    for t in range(1, len(structure)):
        o = backend.encode(state, t, structure[t])
        outs.append(o)
        state = o.new_state
    return outs


def evaluate_structure(backend: Backend, structure: GopStructure, lam: float) -> SearchResult:
    start = time.perf_counter()
    outs = rollout(backend, structure)
    return SearchResult(structure, objective(outs, lam), outs, 1, time.perf_counter() - start)


def _key(obj: float, bits: tuple[int, ...]):
    return (obj, sum(bits), bits)


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"GoP of {n} frame(s) has no predicted frames to optimize")
    if n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive search is limited to GoP sizes <= {MAX_EXHAUSTIVE_N}, got {n}")


def _finish(backend, bits, lam, leaves, start) -> SearchResult:
    structure = from_binary(bits)
    outs = rollout(backend, structure)
    return SearchResult(structure, objective(outs, lam), outs, leaves, time.perf_counter() - start)


def brute_force(backend: Backend, n: int, lam: float) -> SearchResult:
    """Roll every one of the ``2**(n-1)`` structures from the GoP start."""
    _check_n(n)
    start = time.perf_counter()
    best = None
    leaves = 0
    for bits in itertools.product((0, 1), repeat=n - 1):
        outs = rollout(backend, from_binary(bits))
        key = _key(objective(outs, lam), bits)
        leaves += 1
        if best is None or key < best[0]:
            best = (key, outs)
    (obj, _, bits), outs = best
    return SearchResult(from_binary(bits), obj, outs, leaves, time.perf_counter() - start)


class _Dfs:
    def __init__(self, backend: Backend, n: int, lam: float):
        self.backend = backend
        self.n = n
        self.lam = lam
        self.best = None
        self.leaves = 0
        self.path: list[int] = []
        self.outs: list[EncodeOutcome] = []

    def run(self, t: int, state) -> None:
        # Pm branch first, then P; evaluate the target at full depth
        for bit in (0, 1):
            o = self.backend.encode(state, t, _TYPES[bit])
            self.path.append(bit)
            self.outs.append(o)
            if t == self.n - 1:
                self.leaves += 1
                bits = tuple(self.path)
                key = _key(objective(self.outs, self.lam), bits)
                if self.best is None or key < self.best[0]:
                    self.best = (key, list(self.outs))
            else:
                self.run(t + 1, o.new_state)
            self.path.pop()
            self.outs.pop()

    def run_from(self, prefix: tuple[int, ...]) -> None:
        state = self.backend.encode(self.backend.initial_state(), 0, FrameType.I).new_state
        for t, bit in enumerate(prefix, start=1):
            o = self.backend.encode(state, t, _TYPES[bit])
            self.path.append(bit)
            self.outs.append(o)
            state = o.new_state
        t = len(prefix) + 1
        if t == self.n:
            self.leaves += 1
            self.best = (_key(objective(self.outs, self.lam), prefix), list(self.outs))
        else:
            self.run(t, state)


def _dfs_subtree(backend, n, lam, prefix):
    d = _Dfs(backend, n, lam)
    d.run_from(prefix)
    return d.best[0], d.leaves


def dfs_optimal(backend: Backend, n: int, lam: float, jobs: int = 1, memoize: bool = False) -> SearchResult:
    """Depth-first search over all P/Pm assignments.

    With ``jobs > 1`` the tree is split into ``2**d >= jobs`` subtrees by
    their first ``d`` decisions and searched in worker processes; the
    backend must be picklable. ``memoize=True`` instead solves the
    equivalent dynamic program over (frame, reference) states and reports the
    number of states expanded as ``leaves_visited``.
    """
    _check_n(n)
    if memoize:
        return _dfs_memo(backend, n, lam)
    start = time.perf_counter()
    if jobs <= 1:
        d = _Dfs(backend, n, lam)
        d.run_from(())
        (obj, _, bits), outs = d.best
        return SearchResult(from_binary(bits), obj, outs, d.leaves, time.perf_counter() - start)

    depth = 0
    while (1 << depth) < jobs and depth < n - 1:
        depth += 1
    prefixes = list(itertools.product((0, 1), repeat=depth))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(_dfs_subtree, *zip(*[(backend, n, lam, p) for p in prefixes])))
    leaves = sum(r[1] for r in results)
    best = min(r[0] for r in results)
    return _finish(backend, best[2], lam, leaves, start)


def _dfs_memo(backend: Backend, n: int, lam: float) -> SearchResult:
    start = time.perf_counter()
    memo: dict = {}

    def solve(t, state):
        # best (suffix cost, ones, bits) from frame t given the current reference
        if t == n:
            return (0.0, 0, ())
        k = (t, state.ref_index)
        if k in memo:
            return memo[k]
        best = None
        for bit in (0, 1):
            o = backend.encode(state, t, _TYPES[bit])
            cost, ones, bits = solve(t + 1, o.new_state)
            cand = (o.bits + lam * o.task_loss + cost, ones + bit, (bit,) + bits)
            if best is None or cand < best:
                best = cand
        memo[k] = best
        return best

    state = backend.encode(backend.initial_state(), 0, FrameType.I).new_state
    bits = solve(1, state)[2]
    return _finish(backend, bits, lam, len(memo), start)


def greedy(backend: Backend, n: int, lam: float) -> SearchResult:
    """Left to right, pick the type with the smaller one-frame cost (ties: Pm)."""
    if n < 2:
        raise ValueError(f"GoP of {n} frame(s) has no predicted frames to optimize")
    start = time.perf_counter()
    state = backend.encode(backend.initial_state(), 0, FrameType.I).new_state
    bits = []
    for t in range(1, n):
        pm = backend.encode(state, t, FrameType.Pm)
        p = backend.encode(state, t, FrameType.P)
        if p.bits + lam * p.task_loss < pm.bits + lam * pm.task_loss:
            bits.append(1)
            state = p.new_state
        else:
            bits.append(0)
            state = pm.new_state
    return _finish(backend, tuple(bits), lam, 1, start)
