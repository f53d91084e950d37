import json
import pickle
import sys
from pathlib import Path

import numpy as np
import pytest

from oracles import mock_rollout
from vcmctl.backends import (
    BackendState,
    MockBackend,
    MockParams,
    SubprocessBackend,
    TraceBackend,
    encode_request,
    export_trace,
    init_request,
    mock_encode,
    trace_encode,
)
from vcmctl.errors import BackendError, InputDataError
from vcmctl.gop import FrameType, from_binary
from vcmctl.search import rollout

I, P, Pm, Pr = FrameType.I, FrameType.P, FrameType.Pm, FrameType.Pr
DATA = Path(__file__).parent / "data"
STUB = [sys.executable, "-m", "vcmctl.backends.stub_worker"]


def unit_params(**kw):
    d = dict(b_P=1.0, b_m=0.1, l_P=0.2, kappa=1.0, gamma=0.0, motion=(1.0,) * 12)
    d.update(kw)
    return MockParams(**d)


# -- mock


def test_mock_examples():
    p = unit_params()
    o = mock_encode(BackendState(0), 2, Pm, p)
    assert (o.bits, o.task_loss) == pytest.approx((0.1, 2.2))
    assert o.new_state.ref_index == 0
    o = mock_encode(BackendState(4), 5, P, p)
    assert o.bits == 1.0 and o.new_state.ref_index == 5
    flat = unit_params(kappa=0.0)
    assert mock_encode(BackendState(0), 9, Pm, flat).task_loss == pytest.approx(0.2)


def test_mock_pr_and_i():
    p = unit_params(kappa=2.0)
    o = mock_encode(BackendState(0), 3, Pr, p)
    assert o.bits == 0.0 and o.task_loss == pytest.approx(0.2 + 1.5 * 2.0 * 3)
    assert o.new_state.ref_index == 0
    o = mock_encode(BackendState(-1), 0, I, p)
    assert (o.bits, o.task_loss, o.new_state.ref_index) == (10.0, 0.2, 0)


def test_mock_errors():
    p = unit_params()
    with pytest.raises(BackendError):
        mock_encode(BackendState(3), 3, P, p)
    with pytest.raises(BackendError):
        mock_encode(BackendState(-1), 1, P, p)
    with pytest.raises(InputDataError):
        mock_encode(BackendState(0), 40, P, p)
    with pytest.raises(InputDataError):
        MockParams(motion=(-1.0,))
    with pytest.raises(InputDataError):
        MockParams.from_dict({"nope": 1})


def test_mock_matches_oracle_rollout():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 12))
        motion = tuple([0.0] + rng.uniform(0, 2, n - 1).tolist())
        kw = dict(b_P=float(rng.uniform(0.5, 2)), b_m=float(rng.uniform(0, 0.5)), gamma=float(rng.uniform(0, 1)),
                  l_P=float(rng.uniform(0, 1)), kappa=float(rng.uniform(0, 2)))
        bits = tuple(int(b) for b in rng.integers(0, 2, n - 1))
        got = [(o.bits, o.task_loss) for o in rollout(MockBackend(MockParams(motion=motion, **kw)), from_binary(bits))]
        np.testing.assert_allclose(got, mock_rollout(bits, motion, **kw), rtol=1e-12, atol=1e-12)


def test_mock_pm_loss_monotone_in_gap():
    b = MockBackend(unit_params(motion=tuple(np.random.default_rng(1).uniform(0, 1, 12))))
    losses = [b.encode(BackendState(0), t, Pm).task_loss for t in range(1, 12)]
    assert all(y >= x for x, y in zip(losses, losses[1:]))


def test_backends_are_deterministic_and_stateless():
    b = MockBackend(unit_params())
    s0 = BackendState(0)
    a = b.encode(s0, 3, P)
    b.encode(BackendState(2), 3, Pm)
    assert b.encode(s0, 3, P) == a
    assert s0 == BackendState(0)


def test_params_dict_round_trip():
    p = unit_params(gamma=0.3)
    assert MockParams.from_dict(json.loads(json.dumps(p.to_dict()))) == p


# -- trace


def test_trace_lookup_and_reference_rule():
    t = TraceBackend({(1, 0, P): (3.0, 0.4), (1, 0, Pm): (0.5, 0.9)}, 8, 8)
    o = trace_encode(BackendState(0), 1, P, t)
    assert (o.bits, o.task_loss, o.new_state.ref_index) == (3.0, 0.4, 1)
    assert trace_encode(BackendState(0), 1, Pm, t).new_state.ref_index == 0
    with pytest.raises(BackendError, match="t=2 ref=0 type=P"):
        t.encode(BackendState(0), 2, P)


def test_trace_export_replay_identical(tmp_path):
    rng = np.random.default_rng(2)
    mock = MockBackend(unit_params(motion=tuple(rng.uniform(0, 1, 7)), gamma=0.3))
    export_trace(mock, 7, include_pr=True).save(tmp_path / "t.json")
    trace = TraceBackend.load(tmp_path / "t.json")
    assert trace.supports_pr
    for bits in [(0,) * 6, (1,) * 6, (0, 1, 1, 0, 0, 1)]:
        s = from_binary(bits)
        assert rollout(trace, s) == rollout(mock, s)
    doc = json.loads((tmp_path / "t.json").read_text())
    assert doc["width"] == 64 and {"t", "ref", "type", "bits", "loss"} <= set(doc["frames"][0])


def test_trace_without_pr_rejects_pr():
    trace = export_trace(MockBackend(unit_params()), 4)
    with pytest.raises(BackendError):
        trace.encode(BackendState(0), 1, Pr)


def test_trace_malformed(tmp_path):
    (tmp_path / "bad.json").write_text('{"width": 4, "height": 4, "frames": [{"t": 1}]}')
    with pytest.raises(InputDataError, match="entry 0"):
        TraceBackend.load(tmp_path / "bad.json")
    (tmp_path / "bad2.json").write_text("{not json")
    with pytest.raises(InputDataError):
        TraceBackend.load(tmp_path / "bad2.json")


# -- subprocess


def test_request_serialization_golden():
    golden = (DATA / "encode_request_t3_Pm_ref2.jsonl").read_text()
    assert encode_request(3, Pm, 2) + "\n" == golden
    assert init_request(64, 48) == '{"cmd":"init","width":64,"height":48}'


def test_stub_fixed_outcome(tmp_path):
    log = tmp_path / "req.log"
    with SubprocessBackend(STUB + ["--bits", "1.0", "--loss", "0.5", "--log", str(log)], timeout=10) as b:
        o = b.encode(BackendState(2), 3, Pm)
        assert (o.bits, o.task_loss, o.new_state.ref_index) == (1.0, 0.5, 2)
        assert not b.supports_pr
    lines = log.read_text().splitlines()
    assert lines[1] + "\n" == (DATA / "encode_request_t3_Pm_ref2.jsonl").read_text()
    assert json.loads(lines[-1]) == {"cmd": "close"}


def test_stub_mock_matches_in_process(tmp_path):
    p = unit_params(motion=tuple(np.random.default_rng(3).uniform(0, 1, 6)), gamma=0.2)
    (tmp_path / "p.json").write_text(json.dumps(p.to_dict()))
    mock = MockBackend(p)
    with SubprocessBackend(STUB + ["--mock", str(tmp_path / "p.json")], timeout=10) as b:
        assert b.supports_pr
        for bits in [(0, 1, 0, 0, 1), (1, 1, 1, 1, 1)]:
            assert rollout(b, from_binary(bits)) == rollout(mock, from_binary(bits))


def test_stub_timeout():
    b = SubprocessBackend(STUB + ["--hang"], timeout=0.5)
    with pytest.raises(BackendError, match="did not answer"):
        b.encode(BackendState(0), 1, P)
    b.close()


def test_stub_crash_and_garbage():
    b = SubprocessBackend(STUB + ["--crash", "7"], timeout=10)
    with pytest.raises(BackendError, match="code 7"):
        b.encode(BackendState(0), 1, P)
    b.close()
    b = SubprocessBackend(STUB + ["--garbage"], timeout=10)
    with pytest.raises(BackendError, match="malformed"):
        b.encode(BackendState(0), 1, P)
    b.close()


def test_missing_executable():
    with pytest.raises(BackendError):
        SubprocessBackend(["/nonexistent/codec"], timeout=1)


def test_subprocess_pickle_restarts_child():
    b = SubprocessBackend(STUB + ["--bits", "2.5"], timeout=10)
    c = pickle.loads(pickle.dumps(b))
    try:
        assert c.encode(BackendState(0), 1, P).bits == 2.5
        assert c._proc.pid != b._proc.pid
    finally:
        b.close()
        c.close()
