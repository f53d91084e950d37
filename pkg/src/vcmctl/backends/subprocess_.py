"""Bridge to an external codec process speaking newline-delimited JSON.

Wire protocol, one JSON object per line on the child's stdin/stdout::

    -> {"cmd":"init","width":W,"height":H}     <- {"ok":true}
    -> {"cmd":"encode","frame":t,"type":"P","ref":r}   <- {"bits":B,"loss":L}
    -> {"cmd":"close"}

Anything the child prints to stderr is passed through untouched.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import subprocess
import threading

from ..errors import BackendError
from .base import Backend

T_RPC = 30.0

_EOF = object()


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def init_request(width: int, height: int) -> str:
    return _dumps({"cmd": "init", "width": int(width), "height": int(height)})


def encode_request(t: int, ftype, ref: int) -> str:
    return _dumps({"cmd": "encode", "frame": int(t), "type": str(ftype), "ref": int(ref)})


def close_request() -> str:
    return _dumps({"cmd": "close"})


class SubprocessBackend(Backend):
    """One child process; requests are serialized.

    Outcomes are memoized per (frame, reference, type) since backends are
    required to be deterministic. Pickling restarts the child on the other
    side, which is how parallel search gets one child per worker.
    """

    def __init__(self, command, width: int = 64, height: int = 64, timeout: float = T_RPC, memoize: bool = True):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.width = int(width)
        self.height = int(height)
        self.timeout = float(timeout)
        self.memoize = memoize
        self.capabilities: dict = {}
        self._cache: dict = {}
        self._proc = None
        self._lines: queue.Queue = queue.Queue()
        self._start()

    def _start(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendError(f"cannot start codec process {self.command!r}: {exc}") from None
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc.stdout, self._lines), daemon=True).start()
        reply = self._rpc(init_request(self.width, self.height))
        if reply.get("ok") is not True:
            raise BackendError(f"codec process refused init: {reply!r}")
        self.capabilities = dict(reply.get("capabilities", {}))
        self.supports_pr = bool(self.capabilities.get("pr", False))

    @staticmethod
    def _pump(stream, sink):
        for line in stream:
            sink.put(line)
        sink.put(_EOF)

    def _rpc(self, line: str) -> dict:
        proc = self._proc
        if proc is None or proc.poll() is not None:
            raise BackendError(f"codec process is not running (exit code {None if proc is None else proc.returncode})")
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"codec process closed its input: {exc}") from None
        try:
            reply = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._kill()
            raise BackendError(f"codec process did not answer within {self.timeout:g} s") from None
        if reply is _EOF:
            code = proc.wait(timeout=5)
            raise BackendError(f"codec process exited with code {code} before answering")
        try:
            obj = json.loads(reply)
        except json.JSONDecodeError:
            raise BackendError(f"malformed response from codec process: {reply.strip()!r}") from None
        if not isinstance(obj, dict):
            raise BackendError(f"malformed response from codec process: {reply.strip()!r}")
        if "error" in obj:
            raise BackendError(f"codec process error: {obj['error']}")
        return obj

    def _encode(self, state, t, ftype):
        key = (t, state.ref_index, ftype)
        if self.memoize and key in self._cache:
            return self._cache[key]
        obj = self._rpc(encode_request(t, ftype, state.ref_index))
        try:
            bits, loss = float(obj["bits"]), float(obj["loss"])
        except (KeyError, TypeError, ValueError):
            raise BackendError(f"malformed encode response: {obj!r}") from None
        if not (math.isfinite(bits) and math.isfinite(loss)) or bits < 0 or loss < 0:
            raise BackendError(f"encode response out of range: {obj!r}")
        if self.memoize:
            self._cache[key] = (bits, loss)
        return bits, loss

    def _kill(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def close(self) -> None:
        proc = self._proc
        if proc is None:
            return
        if proc.poll() is None:
            try:
                proc.stdin.write(close_request() + "\n")
                proc.stdin.flush()
                proc.stdin.close()
                proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._kill()
        self._proc = None

    def __getstate__(self):
        return {
            "command": self.command,
            "width": self.width,
            "height": self.height,
            "timeout": self.timeout,
            "memoize": self.memoize,
        }

    def __setstate__(self, state):
        self.__init__(**state)

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass
