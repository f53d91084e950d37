"""Compare the compiled kernels against their fallback paths.

The range coder fallback runs the same source uncompiled (``py_func``);
block matching has a separate vectorized numpy implementation.

Usage:
    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --elements 4096 --frame 128 --repeat 5
    python benchmarks/bench_kernels.py --output bench.json
"""

import argparse
import json
import time

import numpy as np

from vcmctl._accel import NUMBA_ENABLED
from vcmctl.entropy import _rc_kernels as rc
from vcmctl.entropy import quantize
from vcmctl.selector.flow import block_matching_flow


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def coder_inputs(n, rng):
    means = rng.normal(0.0, 3.0, n)
    scales = rng.lognormal(0.0, 1.0, n)
    symbols = quantize(rng.normal(means, scales)).astype(np.int32)
    keep = (rng.random(n) < 0.8).astype(np.uint8)
    return symbols, means, scales, keep


def bench_coder(n, repeat, rng):
    symbols, means, scales, keep = coder_inputs(n, rng)
    rows = []
    for name, enc, dec in (
        ("numba", rc.encode_symbols, rc.decode_symbols),
        ("python", getattr(rc.encode_symbols, "py_func", rc.encode_symbols),
         getattr(rc.decode_symbols, "py_func", rc.decode_symbols)),
    ):
        if name == "numba" and not NUMBA_ENABLED:
            continue
        enc(symbols, means, scales, keep)  # warm up
        t_enc, payload = best_of(lambda: enc(symbols, means, scales, keep), repeat)
        out = np.zeros(n, dtype=np.int32)
        t_dec, status = best_of(lambda: dec(payload, means, scales, keep, out), repeat)
        ok = status == 0 and np.array_equal(out[keep == 1], symbols[keep == 1])
        rows.append({"kernel": "range_coder", "path": name, "n": n, "encode_s": t_enc, "decode_s": t_dec,
                     "bytes": int(payload.size), "round_trip": bool(ok)})
    return rows


def bench_flow(size, repeat, rng):
    prev = rng.integers(0, 256, (size, size)).astype(np.uint8)
    cur = np.roll(prev, (2, -3), axis=(0, 1))
    rows = []
    ref = None
    for name, flag in (("numba", True), ("numpy", False)):
        if flag and not NUMBA_ENABLED:
            continue
        block_matching_flow(prev, cur, use_numba=flag)
        t, flow = best_of(lambda: block_matching_flow(prev, cur, use_numba=flag), repeat)
        ref = flow if ref is None else ref
        rows.append({"kernel": "block_matching", "path": name, "n": size * size, "time_s": t,
                     "matches_first": bool(np.array_equal(flow, ref))})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--elements", type=int, default=2048, help="symbols per coder run")
    ap.add_argument("--frame", type=int, default=64, help="square frame size for block matching")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--output", help="write results as JSON")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    rows = bench_coder(args.elements, args.repeat, rng) + bench_flow(args.frame, args.repeat, rng)
    for r in rows:
        if r["kernel"] == "range_coder":
            print(f"range_coder    {r['path']:7s} n={r['n']:<7d} enc {r['encode_s'] * 1e3:9.2f} ms"
                  f"  dec {r['decode_s'] * 1e3:9.2f} ms  round_trip={r['round_trip']}")
        else:
            print(f"block_matching {r['path']:7s} n={r['n']:<7d} {r['time_s'] * 1e3:9.2f} ms"
                  f"  same_flow={r['matches_first']}")
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
