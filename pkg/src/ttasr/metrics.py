"""Evaluation utilities: error-type breakdown and speed counters.

Token granularity is the caller's choice (phones or words); alignment is
plain Levenshtein with unit costs and a deterministic backtrace that prefers
substitutions over deletion+insertion pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .decoder import DecodeTrace, blank_rate


@dataclass(frozen=True)
class ErrorBreakdown:
    substitutions: int
    deletions: int
    insertions: int
    ref_length: int

    @property
    def total_errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.ref_length == 0:
            return math.nan
        return self.total_errors / self.ref_length

    def __add__(self, other: "ErrorBreakdown") -> "ErrorBreakdown":
        return ErrorBreakdown(self.substitutions + other.substitutions,
                              self.deletions + other.deletions,
                              self.insertions + other.insertions,
                              self.ref_length + other.ref_length)


def _as_ids(ref: Sequence, hyp: Sequence):
    table: dict = {}
    def encode(seq):
        out = np.empty(len(seq), dtype=np.int32)
        for i, tok in enumerate(seq):
            out[i] = table.setdefault(tok, len(table))
        return out
    return encode(ref), encode(hyp)


def align_and_count(ref: Sequence, hyp: Sequence) -> ErrorBreakdown:
    """Levenshtein alignment of hyp against ref with error-type counts.

    Empty ref is reported with ref_length 0 and an undefined (NaN) rate.
    """
    ref_ids, hyp_ids = _as_ids(ref, hyp)
    subs, dels, ins = kernels.levenshtein_counts(ref_ids, hyp_ids)
    return ErrorBreakdown(int(subs), int(dels), int(ins), len(ref))


@dataclass(frozen=True)
class SpeedReport:
    rtf: float
    s_rtf: float
    mean_blank_rate: float
    search_fraction: float  # sum(wfst_steps) / sum(frames_total), exact

    def report_lines(self) -> str:
        return (f"rtf={self.rtf:.6f}\ns_rtf={self.s_rtf:.6f}\n"
                f"mean_blank_rate={self.mean_blank_rate:.6f}\n"
                f"search_fraction={self.search_fraction:.6f}\n")


def speed_report(traces: Sequence[DecodeTrace], audio_seconds: float) -> SpeedReport:
    """Aggregate timings and counters over per-utterance traces.

    Wall-clock ratios are reported, never asserted; the deterministic
    counter ratio wfst_steps / frames carries the verification load.
    """
    if not traces:
        raise ValueError("speed_report needs at least one trace")
    if audio_seconds <= 0:
        raise ValueError(f"audio_seconds must be positive, got {audio_seconds}")
    total_ns = sum(t.encoder_ns + t.search_ns for t in traces)
    search_ns = sum(t.search_ns for t in traces)
    frames = sum(t.frames_total for t in traces)
    steps = sum(t.wfst_steps for t in traces)
    alphas = [blank_rate(t) for t in traces]
    return SpeedReport(
        rtf=total_ns / 1e9 / audio_seconds,
        s_rtf=search_ns / 1e9 / audio_seconds,
        mean_blank_rate=sum(alphas) / len(alphas),
        search_fraction=steps / frames if frames else 0.0,
    )
