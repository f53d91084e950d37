"""Minimal codec child for the subprocess protocol (tests and demos).

    python -m vcmctl.backends.stub_worker --bits 1.0 --loss 0.5
    python -m vcmctl.backends.stub_worker --mock params.json
"""

import argparse
import json
import sys
import time

from ..gop import FrameType
from .base import BackendState
from .mock import MockBackend, MockParams


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--bits", type=float, default=1.0)
    ap.add_argument("--loss", type=float, default=0.5)
    ap.add_argument("--mock", help="answer with the mock cost model from this JSON params file")
    ap.add_argument("--hang", action="store_true", help="never answer encode requests")
    ap.add_argument("--crash", type=int, default=None, help="exit with this code on the first encode")
    ap.add_argument("--garbage", action="store_true", help="answer encode requests with non-JSON")
    ap.add_argument("--log", help="append every request line to this file")
    args = ap.parse_args(argv)

    backend = None
    if args.mock:
        with open(args.mock) as fh:
            backend = MockBackend(MockParams.from_dict(json.load(fh)))

    def reply(obj):
        sys.stdout.write(json.dumps(obj, separators=(",", ":")) + "\n")
        sys.stdout.flush()

    for line in sys.stdin:
        if args.log:
            with open(args.log, "a") as fh:
                fh.write(line)
        req = json.loads(line)
        cmd = req.get("cmd")
        if cmd == "init":
            reply({"ok": True, "capabilities": {"pr": backend is not None}})
        elif cmd == "close":
            return 0
        elif cmd == "encode":
            if args.hang:
                time.sleep(3600)
            if args.crash is not None:
                return args.crash
            if args.garbage:
                sys.stdout.write("not json\n")
                sys.stdout.flush()
                continue
            if backend is None:
                reply({"bits": args.bits, "loss": args.loss})
            else:
                out = backend.encode(BackendState(req["ref"]), req["frame"], FrameType(req["type"]))
                reply({"bits": out.bits, "loss": out.task_loss})
        else:
            reply({"error": f"unknown command {cmd!r}"})
    return 0


if __name__ == "__main__":
    sys.exit(main())
