"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS criterion N: ...`` or ``FAIL criterion N: ...``
line to the terminal, whatever pytest's capture mode.
"""

import contextlib
import json
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import bd_rate_fine_grid, central_diff, gaussian_bits_mp, softmax
from vcmctl.backends import MockBackend, MockParams
from vcmctl.cli import main
from vcmctl.dvmp import gumbel_softmax, st_gumbel_grad
from vcmctl.entropy import (
    MODE_EXPLICIT,
    MODE_IMPLICIT,
    Bitstream,
    GaussianPrior,
    decode_tensor,
    encode_tensor,
    estimate_rate,
    gaussian_bits,
    mask_signaling_bits,
    quantize,
)
from vcmctl.evaluation import RateMetricCurve, bd_rate
from vcmctl.gop import all_p, divgop
from vcmctl.search import brute_force, dfs_optimal, evaluate_structure
from vcmctl.selector.features import aggregate_features
from vcmctl.selector.model import materialize, predict, score
from vcmctl.selector.synthetic import make_dataset
from vcmctl.selector.training import train_selector

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    @contextlib.contextmanager
    def run(number, title):
        detail = {}
        try:
            yield detail
        except BaseException as exc:
            with capsys.disabled():
                print(f"\nFAIL criterion {number}: {title} ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})")
            raise
        extra = ", ".join(f"{k}={v}" for k, v in detail.items())
        with capsys.disabled():
            print(f"\nPASS criterion {number}: {title}" + (f" [{extra}]" if extra else ""))

    return run


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def test_criterion_1_dfs_matches_brute_force(verdict):
    with verdict(1, "DFS equals brute force over 200 mock parameterizations") as d:
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        for i in range(200):
            n = 2 + i % 9
            params = MockParams(
                b_P=float(rng.uniform(0.5, 2.0)),
                b_m=float(rng.uniform(0.0, 0.5)),
                gamma=float(rng.uniform(0.0, 1.0)),
                l_P=float(rng.uniform(0.0, 1.0)),
                kappa=float(rng.uniform(0.0, 2.0)),
                motion=tuple([0.0] + rng.uniform(0.0, 1.5, n - 1).tolist()),
            )
            lam = float(rng.uniform(0.0, 3.0))
            b = MockBackend(params)
            fast, slow = dfs_optimal(b, n, lam), brute_force(b, n, lam)
            assert fast.objective == slow.objective and fast.structure == slow.structure, f"instance {i}"
            assert fast.leaves_visited == 2 ** (n - 1)
        assert dfs_optimal(MockBackend(MockParams(motion=(1.0,) * 10)), 10, 0.5).leaves_visited == 512
        elapsed = time.perf_counter() - t0
        d["seconds"] = f"{elapsed:.2f}"
        assert elapsed < 10.0


def test_criterion_2_structure_ordering(verdict):
    with verdict(2, "DFS <= selector <= DivGoP <= all-P on 50 held-out sequences") as d:
        lam = 1.0
        train = make_dataset(40, 1)
        held_out = make_dataset(50, 2)
        weights = train_selector(train, lam=lam, epochs=60, seed=0).weights
        means = {k: [] for k in ("dfs", "selector", "divgop", "all_p")}
        for inp, backend in held_out:
            n = inp.n_predicted + 1
            means["dfs"].append(dfs_optimal(backend, n, lam).objective)
            means["selector"].append(evaluate_structure(backend, predict(inp, weights)[1], lam).objective)
            means["divgop"].append(evaluate_structure(backend, divgop(n), lam).objective)
            means["all_p"].append(evaluate_structure(backend, all_p(n), lam).objective)
        m = {k: float(np.mean(v)) for k, v in means.items()}
        gain = 1.0 - m["dfs"] / m["divgop"]
        d.update({k: f"{v:.4f}" for k, v in m.items()})
        d["dfs_gain_vs_divgop"] = f"{100 * gain:.1f}%"
        assert m["dfs"] <= m["selector"] <= m["divgop"] <= m["all_p"]
        assert gain >= 0.05


def test_criterion_3_coder_round_trip(verdict):
    with verdict(3, "coder round trip, length and skip reconstruction on 1e5 triples") as d:
        rng = np.random.default_rng(7)
        triples = 100_000
        worst = -np.inf
        skipped = 0
        for i in range(triples):
            if i % 1000 == 999:
                dims = (16, 16, 16)
            else:
                dims = tuple(int(v) for v in rng.integers(1, [5, 7, 7]))
            mean = rng.normal(0.0, 5.0, dims) * (100.0 if i % 97 == 0 else 1.0)
            scale = np.exp(rng.uniform(np.log(0.05), np.log(256.0), dims))
            prior = GaussianPrior(mean, scale)
            latent = quantize(rng.normal(prior.mean, prior.scale))
            mask = (rng.random(dims) < rng.uniform(0.0, 1.0)).astype(np.uint8)
            mode = MODE_EXPLICIT if rng.random() < 0.5 else MODE_IMPLICIT
            bs = Bitstream.from_bytes(encode_tensor(latent, prior, mask, mode).to_bytes())
            out = decode_tensor(bs, prior, mask if mode == MODE_IMPLICIT else None)
            keep = mask.astype(bool)
            assert np.array_equal(out[keep], latent[keep]), f"triple {i}: kept symbols differ"
            assert np.array_equal(out[~keep], round_half_away(prior.mean)[~keep]), f"triple {i}: skipped symbols"
            skipped += int((~keep).sum())
            est = estimate_rate(latent, prior, mask)
            if mode == MODE_EXPLICIT:
                est += mask_signaling_bits(mask)
            excess = abs(bs.payload_bits - est) - (0.02 * est + 32)
            worst = max(worst, excess)
            assert excess <= 0, f"triple {i}: {bs.payload_bits} bits vs estimate {est:.1f}"
        d["skipped_checked"] = skipped
        d["worst_margin_bits"] = f"{-worst:.1f}"


def test_criterion_4_rate_spot_value(verdict):
    with verdict(4, "gaussian_bits(0, 0, 1) against high-precision oracle") as d:
        got = float(gaussian_bits(0, 0.0, 1.0))
        want = gaussian_bits_mp(0, 0.0, 1.0)
        d["bits"] = f"{got:.6f}"
        assert abs(got - want) <= 1e-3
        assert abs(got - 1.3848) <= 1e-3


def test_criterion_5_bd_rate(verdict):
    with verdict(5, "BD-rate identical, doubled and constant-ratio curves") as d:
        anchor = [(0.05, 30), (0.1, 33), (0.2, 36), (0.4, 39)]
        test = [(0.04, 30), (0.08, 33), (0.16, 36), (0.32, 39)]
        a = RateMetricCurve.from_points(anchor)
        same = bd_rate(a, a).percent
        doubled = bd_rate(a, RateMetricCurve.from_points([(2 * b, m) for b, m in anchor])).percent
        ratio = bd_rate(a, RateMetricCurve.from_points(test)).percent
        want = bd_rate_fine_grid(anchor, test)
        d.update(identical=f"{same:.2e}", doubled=f"{doubled:.4f}", ratio=f"{ratio:.4f}", oracle=f"{want:.4f}")
        assert abs(same) <= 1e-9
        assert abs(doubled - 100.0) <= 0.1
        assert abs(ratio - want) <= 0.2 and abs(want + 20.0) <= 0.2


def test_criterion_6_gumbel_and_straight_through(verdict):
    with verdict(6, "Gumbel argmax agreement and straight-through gradient") as d:
        tau = 0.01
        agree = sum(int(np.argmax(gumbel_softmax([10.0, 0.0], tau, s)) == 0) for s in range(10_000))
        d["argmax_agreement"] = agree / 10_000
        assert agree >= 9_900
        # with close logits the low-temperature argmax follows the categorical
        logits = np.array([1.0, 0.0, -0.5])
        hits = np.bincount([np.argmax(gumbel_softmax(logits, tau, s)) for s in range(10_000)], minlength=3)
        assert np.allclose(hits / 10_000, softmax(logits), atol=0.02)

        rng = np.random.default_rng(11)
        c = np.array([0.3, -0.2, 0.5, 0.1])

        def loss(h):
            return float(np.sum((h - c) ** 2))

        def grad(h):
            return 2.0 * (h - c)

        worst = 0.0
        checked = 0
        for _ in range(5000):
            z = rng.normal(size=4)
            g_noise = rng.gumbel(size=4)
            soft = softmax((z + g_noise) / tau)
            _, g = st_gumbel_grad(z, g_noise, tau, grad)
            fd = central_diff(lambda v: loss(softmax((v + g_noise) / tau)), z, h=1e-4)
            # identity backward is exact only once the soft sample is one-hot;
            # tiny gradients sit below the finite-difference noise floor
            if soft.max() < 0.999 or np.linalg.norm(fd) < 1e-6:
                continue
            checked += 1
            worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(fd)))
        d["checked"] = checked
        d["worst_rel_err"] = f"{worst:.4f}"
        assert checked >= 200
        assert worst <= 0.05


def test_criterion_7_selector_training(verdict):
    with verdict(7, "selector training decreases objective and separates motion") as d:
        t0 = time.perf_counter()
        data = make_dataset(40, 1)
        res = train_selector(data, lam=1.0, epochs=60, seed=0)
        first, last = res.log[0][1], res.log[-1][1]
        d["objective"] = f"{first:.4f}->{last:.4f}"
        assert last < first
        p = [(score(aggregate_features(inp), res.weights)[0], inp.extra["high_motion"]) for inp, _ in data]
        high = [v for v, h in p if h]
        low = [v for v, h in p if not h]
        d["p_P_high_min"] = f"{min(high):.3f}"
        d["p_P_static_max"] = f"{max(low):.3f}"
        assert min(high) > max(low)
        for v, _ in p:
            for length in range(1, 33):
                bits = materialize(v, length)
                k = int(np.floor(v * length + 0.5))
                assert sum(bits) == k
                pos = np.flatnonzero(bits)
                if len(pos) > 1:
                    gaps = np.diff(pos)
                    assert gaps.max() - gaps.min() <= 1
        elapsed = time.perf_counter() - t0
        d["seconds"] = f"{elapsed:.1f}"
        assert elapsed < 60.0


COMMANDS = [
    ["search", "--gop", "8", "--lambda", "0.7"],
    ["search", "--method", "greedy"],
    ["search", "--method", "select"],
    ["select"],
    ["train-selector", "--sequences", "8", "--epochs", "6"],
    ["curve", "--gops", "2"],
    ["codec-sim", "encode", "--mask-policy", "scale:0.8", "--report", "codec.json"],
    ["codec-sim", "encode", "--explicit", "--mask-policy", "greedy:300", "--out", "e.gmc", "--report", "e.json"],
    ["trace-export", "--gop", "5"],
]


def _snapshot(folder: Path) -> dict:
    out = {}
    for f in sorted(folder.iterdir()):
        data = f.read_bytes()
        if f.suffix == ".json":
            doc = json.loads(data)
            if isinstance(doc, dict):
                doc.pop("wall_time_s", None)
            data = json.dumps(doc, sort_keys=True).encode()
        out[f.name] = data
    return out


def test_criterion_8_cli_determinism(verdict, tmp_path, monkeypatch):
    with verdict(8, "CLI reruns with the same seed give identical reports") as d:
        snaps = []
        for run in ("first", "second"):
            folder = tmp_path / run
            folder.mkdir()
            monkeypatch.chdir(folder)
            for cmd in COMMANDS:
                assert main(cmd + ["--seed", "5"]) == 0, cmd
            Path("a.csv").write_text("bpp,metric\n0.05,30\n0.1,33\n0.2,36\n0.4,39\n")
            Path("t.csv").write_text("bpp,metric\n0.04,30\n0.09,33.5\n0.15,36\n0.3,39.2\n")
            assert main(["bdrate", "--anchor", "a.csv", "--test", "t.csv", "--plot-data", "pd", "--seed", "5"]) == 0
            snaps.append(_snapshot(folder))
        d["files"] = len(snaps[0])
        assert snaps[0].keys() == snaps[1].keys()
        for name in snaps[0]:
            assert snaps[0][name] == snaps[1][name], name
