"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 input-data error, 3 backend error.
Options given on the command line override ``--config`` JSON values, which
override built-in defaults. All randomness derives from ``--seed`` through
named sub-streams.
"""

from __future__ import annotations

import argparse
import json
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .backends import MockBackend, MockParams, SubprocessBackend, TraceBackend, export_trace
from .errors import BackendError, InputDataError
from .gop import FrameType

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3

DEFAULTS = {
    "seed": 0,
    "backend": "mock",
    "gop": 10,
    "lambda": 0.5,
    "jobs": 1,
    "timeout": 30.0,
    "method": "dfs",
    "mini_gop": None,
    "lambdas": "0.1,0.3,0.5,1.0",
    "gops": 8,
    "sequences": 40,
    "epochs": 60,
    "lr": 0.5,
    "tau_start": 1.0,
    "tau_end": 0.3,
    "mock": {},
}

MOCK_DEFAULTS = {"b_I": 10.0, "b_P": 1.0, "b_m": 0.1, "gamma": 0.05, "l_P": 0.2, "kappa": 0.5}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named consumer of the run seed."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


# -- configuration


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputDataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputDataError(f"{path}: config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(_load_config(getattr(args, "config", None)))
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "func"):
            cfg[k] = v
    return cfg


def _mock_params(cfg: dict, gop: int, index: int = 0) -> MockParams:
    d = dict(MOCK_DEFAULTS)
    d.update(cfg.get("mock") or {})
    if cfg.get("mock_params"):
        try:
            d.update(json.loads(Path(cfg["mock_params"]).read_text()))
        except json.JSONDecodeError as exc:
            raise InputDataError(f"{cfg['mock_params']}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if "motion" not in d:
        rng = substream(cfg["seed"], f"search/{index}")
        d["motion"] = [0.0] + rng.uniform(0.1, 1.5, gop - 1).round(6).tolist()
    return MockParams.from_dict(d)


def make_backend(cfg: dict, index: int = 0):
    kind = cfg["backend"]
    if kind == "mock":
        return MockBackend(_mock_params(cfg, cfg["gop"], index))
    if kind == "trace":
        if not cfg.get("trace"):
            raise UsageError("--backend trace needs --trace FILE")
        return TraceBackend.load(cfg["trace"])
    if kind == "exec":
        if not cfg.get("exec"):
            raise UsageError("--backend exec needs --exec COMMAND")
        return SubprocessBackend(cfg["exec"], cfg.get("width", 64), cfg.get("height", 64), timeout=cfg["timeout"])
    raise UsageError(f"unknown backend {kind!r}")


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _check_gop(n: int) -> None:
    if n < 2:
        raise UsageError(f"--gop must be >= 2 for search commands, got {n}")


# -- search / select


def _preanalysis(cfg: dict, backend):
    from .selector.io import preanalysis_from_files
    from .selector.synthetic import render_preanalysis

    if cfg.get("flow_manifest") or cfg.get("luma"):
        return preanalysis_from_files(cfg.get("flow_manifest"), cfg.get("boxes"), cfg.get("luma"), cfg.get("width"), cfg.get("height"))
    if isinstance(backend, MockBackend):
        return render_preanalysis(backend.params.motion[: cfg["gop"]], substream(cfg["seed"], "preanalysis"))
    raise UsageError("the selector needs --flow-manifest or --luma for non-mock backends")


def _weights(cfg: dict):
    from .selector.model import load_weights, zero_weights

    return load_weights(cfg["weights"]) if cfg.get("weights") else zero_weights()


def run_search(cfg: dict) -> dict:
    from . import search as S
    from .gop import all_p, divgop
    from .selector.model import predict

    n = int(cfg["gop"])
    lam = float(cfg["lambda"])
    method = cfg["method"]
    _check_gop(n)
    backend = make_backend(cfg)
    try:
        if method == "dfs":
            res = S.dfs_optimal(backend, n, lam, jobs=int(cfg["jobs"]))
        elif method == "brute":
            res = S.brute_force(backend, n, lam)
        elif method == "greedy":
            res = S.greedy(backend, n, lam)
        elif method == "divgop":
            res = S.evaluate_structure(backend, divgop(n), lam)
        elif method == "all_p":
            res = S.evaluate_structure(backend, all_p(n), lam)
        elif method == "select":
            inp = _preanalysis(cfg, backend)
            if inp.n_predicted != n - 1:
                raise InputDataError(f"pre-analysis covers {inp.n_predicted} predicted frames, GoP of {n} needs {n - 1}")
            _, structure = predict(inp, _weights(cfg), cfg.get("mini_gop"))
            res = S.evaluate_structure(backend, structure, lam)
        else:
            raise UsageError(f"unknown method {method!r}")
    finally:
        backend.close()
    report = res.to_report(lam)
    _write_json(cfg.get("out") or "search_report.json", report)
    print(f"{method} {report['structure']} objective={report['objective']:.6f} leaves={report['leaves_visited']}")
    return report


def run_select(cfg: dict) -> dict:
    from .selector.features import FEATURE_NAMES, aggregate_features
    from .selector.model import predict

    backend = make_backend(cfg) if not (cfg.get("flow_manifest") or cfg.get("luma")) else None
    inp = _preanalysis(cfg, backend)
    s, structure = predict(inp, _weights(cfg), cfg.get("mini_gop"))
    report = {
        "s_logit": [float(s[0]), float(s[1])],
        "structure": str(structure),
        "binary": structure.binary_string,
        "features": dict(zip(FEATURE_NAMES, aggregate_features(inp).tolist())),
    }
    _write_json(cfg.get("out") or "select_report.json", report)
    print(f"p_P={s[0]:.6f} {structure}")
    return report


def run_train(cfg: dict) -> dict:
    from .selector.model import save_weights
    from .selector.synthetic import make_dataset
    from .selector.training import train_selector

    n = int(cfg["gop"])
    _check_gop(n)
    seed = int(cfg["seed"])
    data_seed = int(substream(seed, "training").integers(2**31))
    dataset = make_dataset(int(cfg["sequences"]), data_seed, n - 1)
    train_seed = int(substream(seed, "gumbel").integers(2**31))
    res = train_selector(
        dataset,
        lam=float(cfg["lambda"]),
        temperatures=(float(cfg["tau_start"]), float(cfg["tau_end"])),
        lr=float(cfg["lr"]),
        epochs=int(cfg["epochs"]),
        seed=train_seed,
    )
    save_weights(cfg.get("weights_out") or "selector_weights.json", res.weights)
    res.write_log(cfg.get("log_out") or "train_log.csv")
    first, last = res.log[0], res.log[-1]
    print(f"objective {first[1]:.6f} -> {last[1]:.6f}, mean p_P {first[2]:.4f} -> {last[2]:.4f}")
    return {"log": res.log}


# -- evaluation


def _curve_point(args):
    cfg, lam = args
    from . import search as S
    from .evaluation import curve_point

    outs = []
    width = height = None
    for i in range(int(cfg["gops"])):
        backend = make_backend(cfg, index=i)
        try:
            if cfg["method"] == "greedy":
                res = S.greedy(backend, int(cfg["gop"]), lam)
            else:
                res = S.dfs_optimal(backend, int(cfg["gop"]), lam)
            outs.append(backend.encode(backend.initial_state(), 0, FrameType.I))
            outs.extend(res.per_frame)
            width, height = backend.width, backend.height
        finally:
            backend.close()
    return curve_point(outs, width, height)


def run_curve(cfg: dict) -> None:
    from .evaluation import RateMetricCurve, write_curve_csv

    _check_gop(int(cfg["gop"]))
    try:
        lambdas = [float(x) for x in str(cfg["lambdas"]).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --lambdas {cfg['lambdas']!r}") from None
    tasks = [(cfg, lam) for lam in lambdas]
    if int(cfg["jobs"]) > 1:
        with ProcessPoolExecutor(max_workers=int(cfg["jobs"])) as pool:
            points = list(pool.map(_curve_point, tasks))
    else:
        points = [_curve_point(t) for t in tasks]
    # several lambdas can settle on the same structures; keep one copy
    unique = sorted(set(points))
    if len({b for b, _ in unique}) != len(unique):
        raise InputDataError("lambda sweep produced different metrics at the same rate")
    curve = RateMetricCurve.from_points(unique)
    out = cfg.get("out") or "curve.csv"
    write_curve_csv(out, curve)
    print(f"{len(curve)} points -> {out}")


def run_bdrate(cfg: dict) -> dict:
    from .evaluation import bd_rate, read_curve_csv, write_plot_data

    if not cfg.get("anchor") or not cfg.get("test"):
        raise UsageError("bdrate needs --anchor and --test")
    anchor = read_curve_csv(cfg["anchor"])
    test = read_curve_csv(cfg["test"])
    res = bd_rate(anchor, test, classical=bool(cfg.get("classical")))
    report = {
        "anchor": str(cfg["anchor"]),
        "test": str(cfg["test"]),
        "method": "polynomial" if cfg.get("classical") else "pchip",
        "percent": res.percent,
        "overlap": list(res.overlap),
    }
    _write_json(cfg.get("out") or "bdrate_report.json", report)
    if cfg.get("plot_data"):
        write_plot_data(f"{cfg['plot_data']}.anchor.dat", anchor)
        write_plot_data(f"{cfg['plot_data']}.test.dat", test)
    print(f"BD-rate {res.percent:.4f}%")
    return report


def _load_latent_prior(latent_path, prior_path):
    from .entropy import GaussianPrior

    latent = np.load(latent_path) if latent_path else None
    with np.load(prior_path) as z:
        if "mean" not in z or "scale" not in z:
            raise InputDataError(f"{prior_path}: prior archive needs 'mean' and 'scale' arrays")
        prior = GaussianPrior(z["mean"], z["scale"])
    return latent, prior


def run_codec_sim(cfg: dict) -> dict:
    from .dvmp import EXPLICIT, IMPLICIT, MaskPolicy, decide_mask, write_mask_csv
    from .entropy import (
        MODE_EXPLICIT,
        MODE_IMPLICIT,
        Bitstream,
        GaussianPrior,
        decode_tensor,
        encode_tensor,
        estimate_rate,
        mask_signaling_bits,
        quantize,
    )

    action = cfg["action"]
    if action == "encode":
        out = cfg.get("out") or "stream.gmc"
        if cfg.get("latent") and cfg.get("prior"):
            latent, prior = _load_latent_prior(cfg["latent"], cfg["prior"])
            latent = quantize(latent) if not np.issubdtype(latent.dtype, np.integer) else latent
        elif cfg.get("latent") or cfg.get("prior"):
            raise UsageError("give both --latent and --prior, or neither")
        else:
            try:
                dims = tuple(int(v) for v in str(cfg.get("dims") or "8,16,16").split(","))
            except ValueError:
                raise UsageError(f"bad --dims {cfg.get('dims')!r}") from None
            rng = substream(cfg["seed"], "codec-sim")
            prior = GaussianPrior(rng.normal(0.0, 2.0, dims), rng.lognormal(0.0, 1.0, dims))
            latent = quantize(rng.normal(prior.mean, prior.scale))
            np.save(f"{out}.latent.npy", latent)
            np.savez(f"{out}.prior.npz", mean=prior.mean, scale=prior.scale)
        policy = MaskPolicy.parse(cfg.get("mask_policy") or "scale:0.0", EXPLICIT if cfg.get("explicit") else IMPLICIT)
        mask = decide_mask(prior, latent, policy)
        mode = MODE_IMPLICIT if policy.implicit else MODE_EXPLICIT
        bs = encode_tensor(latent, prior, mask, mode)
        Path(out).write_bytes(bs.to_bytes())
        if cfg.get("mask_csv"):
            write_mask_csv(cfg["mask_csv"], mask)
        decoded = decode_tensor(Bitstream.from_bytes(Path(out).read_bytes()), prior, mask if policy.implicit else None)
        keep = mask.astype(bool)
        if not np.array_equal(decoded[keep], latent[keep]):
            raise InputDataError("round trip failed: kept symbols differ")
        est = estimate_rate(latent, prior, mask)
        side = mask_signaling_bits(mask) if mode == MODE_EXPLICIT else 0
        report = {
            "dims": list(bs.dims),
            "mode": "implicit" if mode == MODE_IMPLICIT else "explicit",
            "kept": int(keep.sum()),
            "payload_bits": bs.payload_bits,
            "estimated_bits": est,
            "mask_bits": side,
            "round_trip": "ok",
        }
        print(f"payload {bs.payload_bits} bits (estimate {est:.1f}, mask {side}), {int(keep.sum())}/{keep.size} kept, round trip ok")
    elif action == "decode":
        src = cfg.get("input") or "stream.gmc"
        prior_path = cfg.get("prior") or f"{src}.prior.npz"
        latent_path = cfg.get("latent") or (f"{src}.latent.npy" if Path(f"{src}.latent.npy").exists() else None)
        latent, prior = _load_latent_prior(latent_path, prior_path)
        bs = Bitstream.from_bytes(Path(src).read_bytes())
        mask = None
        if bs.mode == MODE_IMPLICIT:
            policy = MaskPolicy.parse(cfg.get("mask_policy") or "scale:0.0")
            if not policy.implicit:
                raise UsageError("an implicit stream needs an implicit (scale:T) mask policy")
            mask = decide_mask(prior, None, policy)
        decoded = decode_tensor(bs, prior, mask)
        np.save(cfg.get("out") or f"{src}.decoded.npy", decoded)
        report = {"dims": list(bs.dims), "payload_bits": bs.payload_bits}
        if latent is not None:
            from .entropy.bitstream import read_explicit_mask

            m = mask if mask is not None else read_explicit_mask(bs)[0]
            keep = m.astype(bool)
            ok = bool(np.array_equal(decoded[keep], latent[keep]))
            report["round_trip"] = "ok" if ok else "mismatch"
            if not ok:
                raise InputDataError("decoded symbols differ from the reference latent")
        print(f"decoded {bs.dims} from {bs.payload_bits} payload bits" + (", round trip ok" if latent is not None else ""))
    else:
        raise UsageError(f"unknown codec-sim action {action!r}")
    if cfg.get("report"):
        _write_json(cfg["report"], report)
    return report


def run_trace_export(cfg: dict) -> None:
    backend = make_backend(cfg)
    try:
        trace = export_trace(backend, int(cfg["gop"]), include_pr=bool(cfg.get("include_pr")))
    finally:
        backend.close()
    out = cfg.get("out") or "trace.json"
    trace.save(out)
    print(f"{len(trace.entries)} entries -> {out}")


# -- parser


def _common(p, backend=True):
    p.add_argument("--config", help="JSON config file; command-line flags take precedence")
    p.add_argument("--seed", type=int)
    if backend:
        p.add_argument("--backend", choices=["mock", "trace", "exec"])
        p.add_argument("--mock-params", help="JSON file of mock parameters")
        p.add_argument("--trace", help="trace JSON for --backend trace")
        p.add_argument("--exec", help="codec command line for --backend exec")
        p.add_argument("--timeout", type=float, help="per-request timeout for --backend exec (s)")
        p.add_argument("--width", type=int)
        p.add_argument("--height", type=int)
        p.add_argument("--gop", type=int)
        p.add_argument("--lambda", dest="lambda", type=float)
        p.add_argument("--jobs", type=int)


def _selector_inputs(p):
    p.add_argument("--weights", help="selector weights JSON (2x8)")
    p.add_argument("--flow-manifest", help="flow manifest JSON")
    p.add_argument("--boxes", help="per-frame boxes JSON")
    p.add_argument("--luma", help="raw 8-bit luma frames for block-matching flow")
    p.add_argument("--mini-gop", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="vcmctl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("search", help="search or evaluate a GoP structure")
    _common(p)
    p.add_argument("--method", choices=["dfs", "brute", "greedy", "divgop", "all_p", "select"])
    _selector_inputs(p)
    p.add_argument("--out", help="report JSON (default search_report.json)")
    p.set_defaults(func=run_search)

    p = sub.add_parser("select", help="run the GoP selector on pre-analysis inputs")
    _common(p)
    _selector_inputs(p)
    p.add_argument("--out", help="report JSON (default select_report.json)")
    p.set_defaults(func=run_select)

    p = sub.add_parser("train-selector", help="train selector weights on synthetic mock GoPs")
    _common(p, backend=False)
    p.add_argument("--gop", type=int)
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--sequences", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--tau-start", type=float)
    p.add_argument("--tau-end", type=float)
    p.add_argument("--weights-out")
    p.add_argument("--log-out")
    p.set_defaults(func=run_train)

    p = sub.add_parser("curve", help="sweep lambda and write a rate-metric curve CSV")
    _common(p)
    p.add_argument("--lambdas", help="comma-separated lambda values")
    p.add_argument("--gops", type=int, help="number of mock GoPs per point")
    p.add_argument("--method", choices=["dfs", "greedy"])
    p.add_argument("--out", help="curve CSV (default curve.csv)")
    p.set_defaults(func=run_curve)

    p = sub.add_parser("bdrate", help="BD-rate between two curve CSVs")
    _common(p, backend=False)
    p.add_argument("--anchor")
    p.add_argument("--test")
    p.add_argument("--classical", action="store_true", default=None, help="cubic polynomial fit instead of PCHIP")
    p.add_argument("--plot-data", help="prefix for gnuplot two-column files")
    p.add_argument("--out", help="report JSON (default bdrate_report.json)")
    p.set_defaults(func=run_bdrate)

    p = sub.add_parser("codec-sim", help="skip-mode entropy coding round trip")
    _common(p, backend=False)
    p.add_argument("action", choices=["encode", "decode"])
    p.add_argument("--latent", help=".npy latent (real values are quantized)")
    p.add_argument("--prior", help=".npz with 'mean' and 'scale'")
    p.add_argument("--dims", help="c,h,w for a generated latent (encode without inputs)")
    p.add_argument("--mask-policy", help="scale:T, greedy:BITS or file:PATH")
    p.add_argument("--explicit", action="store_true", default=None, help="signal the mask in the stream")
    p.add_argument("--mask-csv", help="dump the channel-averaged mask")
    p.add_argument("--in", dest="input", help="bitstream to decode")
    p.add_argument("--out")
    p.add_argument("--report", help="write a JSON report")
    p.set_defaults(func=run_codec_sim)

    p = sub.add_parser("trace-export", help="tabulate a backend into a replayable trace")
    _common(p)
    p.add_argument("--include-pr", action="store_true", default=None)
    p.add_argument("--out", help="trace JSON (default trace.json)")
    p.set_defaults(func=run_trace_export)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        args.func(cfg)
    except UsageError as exc:
        print(f"vcmctl: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"vcmctl: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (InputDataError, OSError) as exc:
        print(f"vcmctl: input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"vcmctl: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
