import math

import numpy as np
import pytest

from oracles import greedy_decode_batch, random_model
from ttasr import decoder, wfst
from ttasr.decoder import (DecodeParams, PosteriorFrame, blank_rate,
                           decode_posteriors, decode_utterance, deweight_blank,
                           is_blank_frame)


def frame_from_probs(probs, blank_id=0, t=0):
    return PosteriorFrame(t, np.log(np.asarray(probs, dtype=np.float64)), blank_id)


class TestDeweight:
    def test_beta_zero_is_identity(self):
        f = frame_from_probs([0.7, 0.2, 0.1])
        g = deweight_blank(f, 0.0)
        assert np.array_equal(f.scores, g.scores)

    def test_subtraction(self):
        f = PosteriorFrame(0, np.array([-0.1, -2.0, -3.0]), 0)
        g = deweight_blank(f, 2.0)
        assert g.scores[0] == pytest.approx(-2.1)
        assert np.array_equal(g.scores[1:], f.scores[1:])
        assert np.array_equal(f.scores, [-0.1, -2.0, -3.0])  # input untouched

    def test_argmax_flip_threshold(self):
        # blank at log -0.4, best phone at log -1.0: flips once beta > 0.6
        f = PosteriorFrame(0, np.array([-0.4, -1.0, -5.0]), 0)
        assert int(np.argmax(deweight_blank(f, 0.5).scores)) == 0
        assert int(np.argmax(deweight_blank(f, 0.7).scores)) == 1


class TestSkipTest:
    def test_sentinel_never_skips(self):
        for probs in ([0.999, 0.001], [0.5, 0.5]):
            f = frame_from_probs(probs)
            assert not is_blank_frame(f, 1.1)

    def test_plain_threshold(self):
        f = frame_from_probs([0.97, 0.03])
        assert is_blank_frame(f, 0.95)

    def test_deweight_then_threshold(self):
        # 0.97 * e^-2 ~ 0.131: below 0.95 once deweighted
        f = deweight_blank(frame_from_probs([0.97, 0.03]), 2.0)
        assert math.exp(f.blank_log_score) == pytest.approx(0.97 * math.exp(-2), rel=1e-9)
        assert not is_blank_frame(f, 0.95)
        assert is_blank_frame(f, 0.10)


class TestBlankRate:
    def test_empty_trace(self):
        assert blank_rate(decoder.DecodeTrace()) == 0.0

    def test_counting(self):
        t = decoder.DecodeTrace(frames_total=4, frames_skipped=3, wfst_steps=1)
        assert blank_rate(t) == 0.75


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            DecodeParams(beta_blank=-1.0)
        with pytest.raises(ValueError):
            DecodeParams(beam=0.0)
        with pytest.raises(ValueError):
            DecodeParams(gamma_blank=0.0)

    def test_fsd_flag(self):
        assert DecodeParams(gamma_blank=2.0).fsd
        assert not DecodeParams(gamma_blank=0.95).fsd


class TestDecodePosteriors:
    def test_counting_example(self):
        # 3 of 4 frames have blank prob 0.99
        frames = [[0.99, 0.005, 0.005],
                  [0.99, 0.005, 0.005],
                  [0.02, 0.95, 0.03],
                  [0.99, 0.005, 0.005]]
        params = DecodeParams(beta_blank=0.0, gamma_blank=0.95)
        hyp, trace = decode_posteriors(frames, 0, params)
        assert blank_rate(trace) == 0.75
        assert trace.wfst_steps == 1
        assert hyp == [1]

    def test_sentinel_means_no_skips(self):
        frames = [[0.99, 0.01], [0.98, 0.02]]
        _, trace = decode_posteriors(frames, 0, DecodeParams(beta_blank=0.0,
                                                             gamma_blank=2.0))
        assert trace.frames_skipped == 0
        assert blank_rate(trace) == 0.0

    def test_conservation(self):
        rng = np.random.default_rng(0)
        raw = rng.random((30, 5)) + 1e-3
        frames = raw / raw.sum(axis=1, keepdims=True)
        for gamma in (2.0, 0.95, 0.5):
            _, trace = decode_posteriors(frames, 0,
                                         DecodeParams(beta_blank=0.0,
                                                      gamma_blank=gamma))
            assert trace.frames_skipped + trace.wfst_steps == trace.frames_total == 30

    def test_deweight_monotone_emissions(self):
        rng = np.random.default_rng(1)
        raw = rng.random((40, 6)) + 1e-3
        raw[:, 0] += 1.0  # blank-leaning corpus
        frames = raw / raw.sum(axis=1, keepdims=True)
        counts = []
        for beta in (0.0, 0.5, 1.0, 2.0, 4.0):
            hyp, _ = decode_posteriors(frames, 0,
                                       DecodeParams(beta_blank=beta,
                                                    gamma_blank=2.0))
            counts.append(len(hyp))
        assert counts == sorted(counts)

    def test_skip_monotone_in_gamma(self):
        rng = np.random.default_rng(2)
        raw = rng.random((40, 6)) + 1e-3
        raw[:, 0] += 2.0
        frames = raw / raw.sum(axis=1, keepdims=True)
        skipped = []
        for gamma in (0.99, 0.9, 0.7, 0.5, 0.3):
            _, trace = decode_posteriors(frames, 0,
                                         DecodeParams(beta_blank=0.0,
                                                      gamma_blank=gamma))
            skipped.append(trace.frames_skipped)
        assert skipped == sorted(skipped)

    def test_one_label_per_frame(self):
        rng = np.random.default_rng(3)
        raw = rng.random((25, 4)) + 1e-3
        frames = raw / raw.sum(axis=1, keepdims=True)
        hyp, trace = decode_posteriors(frames, 0, DecodeParams(beta_blank=4.0,
                                                               gamma_blank=2.0))
        assert len(hyp) <= trace.frames_total


class TestDecodeUtterance:
    def test_empty_features(self):
        model = random_model(50)
        hyp, trace = decode_utterance(model, np.zeros((0, 5), np.float32),
                                      DecodeParams())
        assert hyp == []
        assert trace.frames_total == 0

    def test_fsd_equals_plain_greedy(self):
        for seed in range(8):
            model = random_model(seed, scale=1.0)
            rng = np.random.default_rng(seed + 999)
            feats = rng.standard_normal((int(rng.integers(4, 50)), 5)).astype(np.float32)
            params = DecodeParams(beta_blank=0.0, gamma_blank=2.0)
            hyp, trace = decode_utterance(model, feats, params)
            assert hyp == greedy_decode_batch(model, feats, beta=0.0)
            assert trace.frames_skipped == 0
            assert len(trace.emitted_phones) <= trace.frames_total

    def test_graph_alphabet_mismatch(self):
        model = random_model(51, labels=4)  # labels 0..3, blank 0
        g = wfst.Fst()
        s0 = g.add_state()
        g.add_arc(s0, 9, 9, 0.0, s0)  # label 9 outside the model's set
        g.set_final(s0, 0.0)
        with pytest.raises(wfst.AlphabetError):
            decode_utterance(model, np.zeros((8, 5), np.float32),
                             DecodeParams(), graph=g)

    def test_trace_report_format(self):
        model = random_model(52)
        feats = np.random.default_rng(0).standard_normal((16, 5)).astype(np.float32)
        _, trace = decode_utterance(model, feats, DecodeParams())
        line = decoder.trace_report("u1", trace)
        fields = dict(kv.split("=") for kv in line.split())
        assert fields["utt"] == "u1"
        assert int(fields["frames_total"]) == trace.frames_total
        assert int(fields["frames_skipped"]) + int(fields["wfst_steps"]) \
            == int(fields["frames_total"])
