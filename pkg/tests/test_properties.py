import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from vcmctl.entropy import MODE_EXPLICIT, MODE_IMPLICIT, Bitstream, GaussianPrior, decode_tensor, encode_tensor
from vcmctl.gop import FrameType, from_binary, reference_schedule, to_binary
from vcmctl.selector.model import materialize

bit_vectors = st.lists(st.integers(0, 1), min_size=1, max_size=30)


@given(bit_vectors)
def test_binary_bijection(bits):
    s = from_binary(bits)
    assert to_binary(s) == tuple(bits)
    assert s.frames[0] == FrameType.I and len(s.frames) == len(bits) + 1


@given(bit_vectors)
def test_reference_is_latest_anchor(bits):
    refs = reference_schedule(from_binary(bits))
    assert refs[0] == -1
    anchor = 0
    for t, b in enumerate(bits, start=1):
        assert refs[t] == anchor
        if b:
            anchor = t


@given(st.floats(0.0, 1.0), st.integers(1, 40))
def test_materialize_count_and_spread(p, length):
    v = materialize(p, length)
    k = int(np.floor(p * length + 0.5))
    assert len(v) == length and sum(v) == k
    # every window of equal size holds ones within one of each other
    for w in range(1, length + 1):
        counts = [sum(v[i:i + w]) for i in range(length - w + 1)]
        assert max(counts) - min(counts) <= 1
    if k:
        assert v[-1] == 1


@st.composite
def tensors(draw):
    c, h, w = draw(st.integers(1, 3)), draw(st.integers(1, 5)), draw(st.integers(1, 5))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    mean = rng.normal(0, 4, (c, h, w))
    scale = np.exp(rng.uniform(-3, 4, (c, h, w)))
    spread = draw(st.sampled_from([1.0, 3.0, 50.0]))
    latent = np.clip(np.rint(rng.normal(mean, spread * scale)), -(2**15), 2**15 - 1).astype(np.int32)
    mask = (rng.random((c, h, w)) < draw(st.floats(0, 1))).astype(np.uint8)
    return GaussianPrior(mean, scale), latent, mask


@settings(max_examples=150, deadline=None)
@given(tensors(), st.sampled_from([MODE_IMPLICIT, MODE_EXPLICIT]))
def test_round_trip_restores_kept_symbols(case, mode):
    prior, latent, mask = case
    bs = Bitstream.from_bytes(encode_tensor(latent, prior, mask, mode).to_bytes())
    out = decode_tensor(bs, prior, mask if mode == MODE_IMPLICIT else None)
    keep = mask.astype(bool)
    assert np.array_equal(out[keep], latent[keep])
