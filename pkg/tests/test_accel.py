import os
import subprocess
import sys

import numpy as np
import pytest

from vcmctl._accel import NUMBA_ENABLED
from vcmctl.entropy import _rc_kernels as rc
from vcmctl.entropy import quantize
from vcmctl.selector.flow import block_matching_flow

needs_numba = pytest.mark.skipif(not NUMBA_ENABLED, reason="numba disabled or missing")


def coder_inputs(n, seed):
    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, 3.0, n)
    scales = rng.lognormal(0.0, 1.0, n)
    symbols = quantize(rng.normal(means, scales)).astype(np.int32)
    symbols[:3] = [rc.SYMBOL_MAX, -rc.SYMBOL_MAX - 1, 4000]
    keep = (rng.random(n) < 0.8).astype(np.uint8)
    keep[:3] = 1
    return symbols, means, scales, keep


@needs_numba
def test_range_coder_paths_are_byte_identical():
    for seed in range(3):
        symbols, means, scales, keep = coder_inputs(500, seed)
        fast = rc.encode_symbols(symbols, means, scales, keep)
        slow = rc.encode_symbols.py_func(symbols, means, scales, keep)
        assert np.array_equal(fast, slow)
        a = np.zeros_like(symbols)
        b = np.zeros_like(symbols)
        assert rc.decode_symbols(fast, means, scales, keep, a) == rc.decode_symbols.py_func(fast, means, scales, keep, b)
        assert np.array_equal(a, b)
        assert np.array_equal(a[keep == 1], symbols[keep == 1])


def test_block_matching_paths_agree():
    rng = np.random.default_rng(0)
    prev = rng.integers(0, 256, (48, 64)).astype(np.float64)
    cur = np.roll(prev, (1, -2), axis=(0, 1)) + rng.normal(0, 2, prev.shape)
    fast = block_matching_flow(prev, cur, use_numba=True)
    slow = block_matching_flow(prev, cur, use_numba=False)
    assert np.array_equal(fast, slow)


def test_fallback_flag_in_fresh_interpreter():
    code = (
        "import numpy as np\n"
        "from vcmctl._accel import NUMBA_ENABLED\n"
        "from vcmctl.entropy import GaussianPrior, encode_tensor, decode_tensor\n"
        "assert not NUMBA_ENABLED\n"
        "rng = np.random.default_rng(1)\n"
        "p = GaussianPrior(rng.normal(size=(2,4,4)), rng.uniform(0.2, 3, (2,4,4)))\n"
        "x = np.rint(rng.normal(p.mean, p.scale)).astype(int)\n"
        "bs = encode_tensor(x, p, np.ones(p.dims, np.uint8))\n"
        "assert np.array_equal(decode_tensor(bs, p, np.ones(p.dims, np.uint8)), x)\n"
        "print(bs.to_bytes().hex())\n"
    )
    env = dict(os.environ, VCMCTL_DISABLE_NUMBA="1")
    slow = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert slow.returncode == 0, slow.stderr
    env["VCMCTL_DISABLE_NUMBA"] = "0"
    fast = subprocess.run([sys.executable, "-c", code.replace("assert not NUMBA_ENABLED\n", "")], env=env,
                          capture_output=True, text=True)
    assert fast.returncode == 0, fast.stderr
    assert fast.stdout == slow.stdout
