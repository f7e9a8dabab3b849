import numpy as np
import pytest

from oracles import random_model
from ttasr import container
from ttasr.compress import CompressionSpec, quantize_int8, svd_compress
from ttasr.container import (MagicError, ShapeMismatchError, TruncatedError,
                             VersionError, load_model, save_model)


@pytest.fixture
def model():
    return random_model(100)


def test_round_trip_bit_exact(model):
    blob = save_model(model)
    again = save_model(load_model(blob))
    assert blob == again


def test_round_trip_preserves_weights(model):
    loaded = load_model(save_model(model))
    assert np.array_equal(loaded.embedding, model.embedding)
    assert np.array_equal(loaded.dfsmn[0].taps, model.dfsmn[0].taps)
    assert np.array_equal(loaded.dfsmn[1].in_proj.w, model.dfsmn[1].in_proj.w)
    assert loaded.config == model.config


def test_bad_magic(model):
    blob = bytearray(save_model(model))
    blob[:4] = b"NOPE"
    with pytest.raises(MagicError):
        load_model(bytes(blob))


def test_bad_version(model):
    blob = bytearray(save_model(model))
    blob[4] = 9
    with pytest.raises(VersionError):
        load_model(bytes(blob))


def test_truncated_payload(model):
    blob = save_model(model)
    with pytest.raises(TruncatedError):
        load_model(blob[:-10])
    with pytest.raises(TruncatedError):
        load_model(blob[:6])


def test_trailing_garbage(model):
    with pytest.raises(TruncatedError):
        load_model(save_model(model) + b"\x00\x00")


def test_shape_inconsistency(model):
    # claim one more memory layer than the payload carries
    blob = save_model(model)
    import json
    import struct
    meta_len = struct.unpack("<I", blob[5:9])[0]
    meta = json.loads(blob[9:9 + meta_len])
    meta["config"]["num_dfsmn_layers"] = 3
    doc = json.dumps(meta, separators=(",", ":")).encode()
    patched = blob[:5] + struct.pack("<I", len(doc)) + doc + blob[9 + meta_len:]
    with pytest.raises(ShapeMismatchError):
        load_model(patched)


def test_error_codes_distinct():
    codes = {MagicError.code, VersionError.code, ShapeMismatchError.code,
             TruncatedError.code}
    assert len(codes) == 4


def test_factorized_round_trip(model):
    small = svd_compress(model, CompressionSpec(rank=2))
    loaded = load_model(save_model(small))
    assert loaded.dfsmn[0].in_proj.rank == 2
    blob = save_model(small)
    assert save_model(loaded) == blob


def test_quantized_round_trip(model):
    q = quantize_int8(model)
    loaded = load_model(save_model(q))
    assert np.array_equal(loaded.dfsmn[0].in_proj.q, q.dfsmn[0].in_proj.q)
    assert np.array_equal(loaded.dfsmn[0].in_proj.scale, q.dfsmn[0].in_proj.scale)
    assert save_model(loaded) == save_model(q)


def test_fixture_model_loads(fixture_model):
    assert fixture_model.config.num_labels == 13
    assert fixture_model.param_count() > 0
