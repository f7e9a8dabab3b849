"""Behavioural checks on the committed fixture kit."""

import os
import subprocess
import sys

import pytest

from conftest import FIXTURES, read_refs
from ttasr import decoder, metrics
from ttasr.decoder import DecodeParams, decode_utterance


def feat_paths():
    d = os.path.join(FIXTURES, "feats")
    return [os.path.join(d, n) for n in sorted(os.listdir(d))]


def test_psd_matches_fsd_without_deweight(fixture_model, fixture_graph,
                                          fixture_feats):
    skipped = total = 0
    for utt, feats in fixture_feats:
        fsd, _ = decode_utterance(fixture_model, feats,
                                  DecodeParams(beta_blank=0.0, gamma_blank=2.0),
                                  graph=fixture_graph)
        psd, tr = decode_utterance(fixture_model, feats,
                                   DecodeParams(beta_blank=0.0, gamma_blank=0.95),
                                   graph=fixture_graph)
        assert fsd == psd, utt
        skipped += tr.frames_skipped
        total += tr.frames_total
    assert skipped / total > 0.4  # silences and repeat frames are peaky blanks


def test_greedy_tracks_phone_refs_at_default_deweight(fixture_model,
                                                      fixture_graph,
                                                      fixture_feats):
    refs = read_refs("refs_phones.txt")
    agg = metrics.ErrorBreakdown(0, 0, 0, 0)
    for utt, feats in fixture_feats:
        hyp, _ = decode_utterance(fixture_model, feats,
                                  DecodeParams(beta_blank=2.0, gamma_blank=0.95))
        toks = [fixture_graph.isyms.sym_of(l) for l in hyp]
        agg = agg + metrics.align_and_count(refs[utt], toks)
    assert agg.wer == 0.0


def test_word_error_rate_is_low_but_stable(fixture_model, fixture_graph,
                                           fixture_feats):
    refs = read_refs("refs_words.txt")
    agg = metrics.ErrorBreakdown(0, 0, 0, 0)
    for utt, feats in fixture_feats:
        hyp, _ = decode_utterance(fixture_model, feats,
                                  DecodeParams(beta_blank=2.0, gamma_blank=2.0),
                                  graph=fixture_graph)
        toks = [fixture_graph.osyms.sym_of(l) for l in hyp]
        agg = agg + metrics.align_and_count(refs[utt], toks)
    # homophone picks and weak-phone words cost a little; anything above
    # this band means the engine or fixtures moved
    assert 0.0 <= agg.wer < 0.25


def test_speed_report_on_fixture_traces(fixture_model, fixture_graph,
                                        fixture_feats):
    traces = []
    for _, feats in fixture_feats[:10]:
        _, tr = decode_utterance(fixture_model, feats,
                                 DecodeParams(beta_blank=0.0, gamma_blank=0.95),
                                 graph=fixture_graph)
        traces.append(tr)
    audio = sum(len(f) for _, f in fixture_feats[:10]) * 0.01
    rep = metrics.speed_report(traces, audio)
    assert rep.s_rtf <= rep.rtf
    assert rep.search_fraction == pytest.approx(1 - rep.mean_blank_rate, abs=0.2)


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_backends_reproduce_golden_fsd(tmp_path, backend):
    out = str(tmp_path / f"hyp_{backend}.txt")
    env = dict(os.environ, TT_BACKEND=backend)
    cmd = [sys.executable, "-m", "ttasr", "decode",
           "--model", os.path.join(FIXTURES, "model.ttrd"),
           "--graph", os.path.join(FIXTURES, "graph"),
           "--fsd", "--beta", "2.0", "--output", out] + feat_paths()
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    with open(out) as got, open(os.path.join(FIXTURES, "golden_fsd.txt")) as want:
        assert got.read() == want.read()
