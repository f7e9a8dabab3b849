import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_strings, edit_distance_dp
from ttasr.decoder import DecodeTrace
from ttasr.metrics import align_and_count, speed_report

tokens = st.lists(st.sampled_from("abc"), max_size=8)


class TestAlign:
    def test_identity(self):
        b = align_and_count(list("abc"), list("abc"))
        assert (b.substitutions, b.deletions, b.insertions) == (0, 0, 0)
        assert b.wer == 0.0

    def test_single_deletion(self):
        b = align_and_count(["a", "b", "c"], ["a", "c"])
        assert (b.substitutions, b.deletions, b.insertions) == (0, 1, 0)
        assert b.wer == pytest.approx(1 / 3)

    def test_substitution_preferred_over_del_ins(self):
        b = align_and_count(["a"], ["b"])
        assert (b.substitutions, b.deletions, b.insertions) == (1, 0, 0)

    def test_empty_ref_flagged(self):
        b = align_and_count([], ["a", "b"])
        assert b.ref_length == 0
        assert b.insertions == 2
        assert math.isnan(b.wer)

    def test_works_on_strings_and_ints(self):
        assert align_and_count(["ka", "lo"], ["ka", "lo"]).total_errors == 0
        assert align_and_count([1, 2, 3], [1, 3]).deletions == 1

    @given(tokens, tokens)
    @settings(max_examples=150, deadline=None)
    def test_total_matches_independent_dp(self, ref, hyp):
        b = align_and_count(ref, hyp)
        assert b.total_errors == edit_distance_dp(ref, hyp)

    @given(tokens, tokens, tokens)
    @settings(max_examples=100, deadline=None)
    def test_triangle_inequality(self, a, b, c):
        d_ac = align_and_count(a, c).total_errors
        d_ab = align_and_count(a, b).total_errors
        d_bc = align_and_count(b, c).total_errors
        assert d_ac <= d_ab + d_bc

    def test_breakdown_consistency_exhaustive_small(self):
        strings = all_strings("ab", 3)
        for ref in strings:
            for hyp in strings:
                b = align_and_count(list(ref), list(hyp))
                assert b.total_errors == edit_distance_dp(ref, hyp)
                assert b.deletions <= len(ref)
                assert b.insertions <= len(hyp)


def mk_trace(total, skipped, enc_ns=1000, search_ns=500):
    return DecodeTrace(frames_total=total, frames_skipped=skipped,
                       wfst_steps=total - skipped, encoder_ns=enc_ns,
                       search_ns=search_ns)


class TestSpeedReport:
    def test_all_fsd_zero_alpha(self):
        rep = speed_report([mk_trace(10, 0), mk_trace(20, 0)], audio_seconds=1.0)
        assert rep.mean_blank_rate == 0.0
        assert rep.search_fraction == 1.0

    def test_counter_ratio_exact(self):
        rep = speed_report([mk_trace(4, 3), mk_trace(4, 3)], audio_seconds=2.0)
        assert rep.mean_blank_rate == 0.75
        assert rep.search_fraction == 0.25

    def test_s_rtf_le_rtf(self):
        rep = speed_report([mk_trace(4, 1, enc_ns=5000, search_ns=1500)],
                           audio_seconds=0.5)
        assert rep.s_rtf <= rep.rtf

    def test_validation(self):
        with pytest.raises(ValueError):
            speed_report([], 1.0)
        with pytest.raises(ValueError):
            speed_report([mk_trace(1, 0)], 0.0)

    def test_report_lines_format(self):
        rep = speed_report([mk_trace(4, 1)], 1.0)
        lines = rep.report_lines().strip().splitlines()
        assert all("=" in l for l in lines)
