import numpy as np
import pytest

from oracles import (encoder_forward_batch, joint_forward, predictor_forward,
                     random_model)
from ttasr import nnet
from ttasr.linalg import ShapeError


def stream_encode(model, feats):
    state = nnet.EncoderState(model)
    outs = []
    for f in feats:
        outs.extend(nnet.encoder_push(model, state, f))
    pre = len(outs)
    outs.extend(nnet.encoder_flush(model, state))
    mat = np.array(outs) if outs else np.zeros((0, model.config.encoder_dim))
    return mat, pre, state


class TestConfig:
    def test_small_defaults(self):
        c = nnet.ModelConfig()
        assert c.encoder_dim == 400
        assert c.num_dfsmn_layers == 8
        assert c.joint_dim == 100
        assert c.dfsmn_left == 8
        assert c.dfsmn_right == 2
        assert c.predictor_context == 4
        assert c.num_labels == 211
        assert c.subsample_factor == 4

    def test_invalid_configs(self):
        with pytest.raises(ValueError):
            nnet.ModelConfig(num_labels=1)
        with pytest.raises(ValueError):
            nnet.ModelConfig(blank_id=211)
        with pytest.raises(ValueError):
            nnet.ModelConfig(subsample_factor=2)
        with pytest.raises(ValueError):
            nnet.ModelConfig(dfsmn_left=-1)


class TestEncoder:
    def test_zero_weights_annihilate(self):
        model = random_model(0, scale=0.0)
        feats = np.random.default_rng(0).standard_normal((12, 5)).astype(np.float32)
        out, _, _ = stream_encode(model, feats)
        assert np.array_equal(out, np.zeros_like(out))

    def test_subsample_counting(self):
        model = random_model(1, right=0)
        feats = np.zeros((8, 5), dtype=np.float32)
        out, pre, state = stream_encode(model, feats)
        assert pre == 2  # 8 raw frames, factor 4, no lookahead
        assert state.subsampled_consumed == 2

    def test_flush_empty_without_right_context(self):
        model = random_model(2, right=0)
        state = nnet.EncoderState(model)
        for f in np.zeros((9, 5), dtype=np.float32):
            nnet.encoder_push(model, state, f)
        assert nnet.encoder_flush(model, state) == []

    def test_flush_drains_total_lookahead(self):
        model = random_model(3, layers=2, right=1)
        feats = np.random.default_rng(3).standard_normal((40, 5)).astype(np.float32)
        state = nnet.EncoderState(model)
        outs = []
        for f in feats:
            outs.extend(nnet.encoder_push(model, state, f))
        flushed = nnet.encoder_flush(model, state)
        assert len(flushed) == model.config.total_lookahead == 2
        # invariant held before the flush
        assert len(outs) == state.subsampled_consumed - model.config.total_lookahead

    @pytest.mark.parametrize("tlen", [1, 2, 3, 5, 8, 13, 21, 40, 77, 100])
    def test_streaming_equals_batch(self, tlen):
        model = random_model(4)
        rng = np.random.default_rng(tlen)
        feats = rng.standard_normal((tlen, 5)).astype(np.float32)
        got, _, _ = stream_encode(model, feats)
        want = encoder_forward_batch(model, feats)
        assert got.shape == want.shape
        if got.size:
            assert np.abs(got - want).max() < 1e-4

    def test_wrong_frame_length(self):
        model = random_model(5)
        state = nnet.EncoderState(model)
        with pytest.raises(ShapeError):
            nnet.encoder_push(model, state, np.zeros(4, dtype=np.float32))

    def test_causality_by_perturbation(self):
        model = random_model(6)
        c = model.config
        rng = np.random.default_rng(6)
        feats = rng.standard_normal((64, 5)).astype(np.float32)
        base = encoder_forward_batch(model, feats)
        for t in (20, 33, 57):
            bumped = feats.copy()
            bumped[t] += 1.0
            out = encoder_forward_batch(model, bumped)
            safe = int(np.ceil(t / 4)) - c.total_lookahead
            if safe > 0:
                assert np.array_equal(out[:safe], base[:safe])
            assert not np.allclose(out, base)


class TestPredictor:
    def test_zero_weights(self):
        model = random_model(7, scale=0.0)
        state = nnet.PredictorState(model)
        assert np.array_equal(nnet.predictor_step(model, state), np.zeros(6))

    def test_purity(self):
        model = random_model(8)
        s1 = nnet.PredictorState(model)
        s2 = nnet.PredictorState(model)
        for lab in (3, 1, 4):
            s1.advance(lab)
            s2.advance(lab)
        a = nnet.predictor_step(model, s1)
        assert np.array_equal(a, nnet.predictor_step(model, s2))

    def test_depends_only_on_last_m(self):
        model = random_model(9, context=3)
        s1 = nnet.PredictorState(model)
        s2 = nnet.PredictorState(model)
        for lab in (1, 2, 5, 6, 3):
            s1.advance(lab)
        for lab in (4, 4, 5, 6, 3):  # same last three labels
            s2.advance(lab)
        assert np.array_equal(nnet.predictor_step(model, s1),
                              nnet.predictor_step(model, s2))

    def test_matches_reference(self):
        model = random_model(10)
        state = nnet.PredictorState(model)
        state.advance(5)
        got = nnet.predictor_step(model, state)
        sos = model.config.sos_id
        want = predictor_forward(model, [sos, sos, 5])
        assert np.abs(got - want).max() < 1e-5


class TestJoint:
    def test_zero_weights_uniform(self):
        model = random_model(11, scale=0.0)
        out = nnet.joint_step(model, np.zeros(8, np.float32), np.zeros(6, np.float32))
        assert np.allclose(out, 1 / 7)

    def test_probability_vector(self):
        model = random_model(12)
        rng = np.random.default_rng(12)
        for _ in range(10):
            out = nnet.joint_step(model,
                                  rng.standard_normal(8).astype(np.float32),
                                  rng.standard_normal(6).astype(np.float32))
            assert out.min() >= 0
            assert abs(out.sum() - 1.0) < 1e-5

    def test_matches_reference(self):
        model = random_model(13)
        rng = np.random.default_rng(13)
        h_enc = rng.standard_normal(8).astype(np.float32)
        h_pred = rng.standard_normal(6).astype(np.float32)
        got = nnet.joint_step(model, h_enc, h_pred)
        want = joint_forward(model, h_enc, h_pred)
        assert np.abs(got - want).max() < 1e-5

    def test_shape_errors(self):
        model = random_model(14)
        with pytest.raises(ShapeError):
            nnet.joint_step(model, np.zeros(7, np.float32), np.zeros(6, np.float32))
        with pytest.raises(ShapeError):
            nnet.joint_step(model, np.zeros(8, np.float32), np.zeros(5, np.float32))
