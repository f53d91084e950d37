"""Codec backends behind one explicit-state contract."""

from .base import Backend, BackendState, EncodeOutcome, advance
from .mock import MockBackend, MockParams, mock_encode
from .subprocess_ import T_RPC, SubprocessBackend, encode_request, init_request
from .trace import TraceBackend, export_trace, trace_encode

__all__ = [
    "T_RPC",
    "Backend",
    "BackendState",
    "EncodeOutcome",
    "MockBackend",
    "MockParams",
    "SubprocessBackend",
    "TraceBackend",
    "advance",
    "encode_request",
    "export_trace",
    "init_request",
    "mock_encode",
    "trace_encode",
]
