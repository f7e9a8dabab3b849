"""Streaming blank-skipping decode loop.

Per encoder frame: score the label set against the current predictor state,
lower the blank score by a fixed log-domain deweight, track the greedy label
(advancing the predictor history on non-blank), and hand the frame to the
WFST search only when the deweighted blank score falls at or below the skip
threshold. With the threshold sentinel above 1 no frame is ever skipped and
the loop degrades to plain frame-synchronous decoding.

Scores stay unnormalized after deweighting; the deweight is an exact
subtraction in the log domain.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import nnet, wfst
from .linalg import log_scores

FSD_SENTINEL = 2.0  # any gamma > 1 disables skipping


@dataclass
class PosteriorFrame:
    """One label-score vector in the natural-log domain (unnormalized)."""

    t: int
    scores: np.ndarray
    blank_id: int

    @property
    def blank_log_score(self) -> float:
        return float(self.scores[self.blank_id])


@dataclass(frozen=True)
class DecodeParams:
    beta_blank: float = 2.0
    gamma_blank: float = 0.95
    beam: float = 16.0
    max_active: int = 1000

    def __post_init__(self):
        if self.beta_blank < 0:
            raise ValueError(f"beta_blank must be >= 0, got {self.beta_blank}")
        if self.gamma_blank <= 0:
            raise ValueError(f"gamma_blank must be positive, got {self.gamma_blank}")
        if self.beam <= 0:
            raise ValueError(f"beam must be positive, got {self.beam}")

    @property
    def fsd(self) -> bool:
        return self.gamma_blank > 1.0


@dataclass
class DecodeTrace:
    emitted_phones: list[int] = field(default_factory=list)
    frames_total: int = 0
    frames_skipped: int = 0
    wfst_steps: int = 0
    encoder_ns: int = 0
    search_ns: int = 0

    def check(self) -> None:
        assert self.frames_skipped + self.wfst_steps == self.frames_total


def deweight_blank(frame: PosteriorFrame, beta_blank: float) -> PosteriorFrame:
    """Lower the blank entry by beta_blank; nothing else changes."""
    scores = frame.scores.copy()
    scores[frame.blank_id] -= beta_blank
    return PosteriorFrame(frame.t, scores, frame.blank_id)


def is_blank_frame(frame: PosteriorFrame, gamma_blank: float) -> bool:
    """True when the (already deweighted) blank score clears the threshold."""
    return frame.blank_log_score > math.log(gamma_blank)


def blank_rate(trace: DecodeTrace) -> float:
    if trace.frames_total == 0:
        return 0.0
    return trace.frames_skipped / trace.frames_total


def _greedy_label(scores: np.ndarray) -> int:
    # ties resolve to the lowest label index (np.argmax guarantees this)
    return int(np.argmax(scores))


def decode_posteriors(frames: Iterable[np.ndarray], blank_id: int,
                      params: DecodeParams,
                      graph: Optional[wfst.Fst] = None,
                      prior: Optional[wfst.PhonePrior] = None,
                      log_domain: bool = False):
    """Run the skip/deweight/search loop over precomputed score vectors.

    ``frames`` yields softmax-domain score vectors (or log-domain ones when
    ``log_domain`` is set). Used directly by tests and benchmarks; the model
    path goes through :func:`decode_utterance`.
    """
    trace = DecodeTrace()
    tokens = wfst.start_tokens(graph) if graph is not None else None
    for raw in frames:
        scores = np.asarray(raw, dtype=np.float64)
        if not log_domain:
            scores = log_scores(scores)
        frame = PosteriorFrame(trace.frames_total, scores, blank_id)
        frame = deweight_blank(frame, params.beta_blank)
        trace.frames_total += 1
        y = _greedy_label(frame.scores)
        if y != blank_id:
            trace.emitted_phones.append(y)
        if is_blank_frame(frame, params.gamma_blank):
            trace.frames_skipped += 1
            continue
        trace.wfst_steps += 1
        if graph is not None:
            t0 = time.perf_counter_ns()
            tokens = wfst.beam_search_step(graph, tokens, frame, prior, params)
            trace.search_ns += time.perf_counter_ns() - t0
    hyp = _finish(graph, tokens, trace)
    trace.check()
    return hyp, trace


def _finish(graph, tokens, trace):
    if graph is None:
        return list(trace.emitted_phones)
    if trace.frames_total == 0:
        return []
    t0 = time.perf_counter_ns()
    labels, _cost = wfst.best_path(tokens, graph)
    trace.search_ns += time.perf_counter_ns() - t0
    return labels


def decode_utterance(model: nnet.TransducerModel, features: np.ndarray,
                     params: DecodeParams,
                     graph: Optional[wfst.Fst] = None,
                     prior: Optional[wfst.PhonePrior] = None):
    """Full streaming decode of one utterance.

    Returns (hypothesis, trace): word-label ids from the graph's output
    alphabet in graph mode, greedy phone ids in graph-free mode. The predictor
    history advances on the greedy label even in graph mode; one label per
    frame at most.
    """
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {features.shape}")
    c = model.config
    if graph is not None:
        _check_graph_alphabet(graph, c)

    trace = DecodeTrace()
    enc_state = nnet.EncoderState(model)
    pred_state = nnet.PredictorState(model)
    tokens = wfst.start_tokens(graph) if graph is not None else None

    t0 = time.perf_counter_ns()
    h_pred = nnet.predictor_step(model, pred_state)
    enc_frames: list[np.ndarray] = []
    for raw in features:
        enc_frames.extend(nnet.encoder_push(model, enc_state, raw))
    enc_frames.extend(nnet.encoder_flush(model, enc_state))
    trace.encoder_ns += time.perf_counter_ns() - t0

    for h_enc in enc_frames:
        t0 = time.perf_counter_ns()
        probs = nnet.joint_step(model, h_enc, h_pred)
        scores = log_scores(probs.astype(np.float64))
        trace.encoder_ns += time.perf_counter_ns() - t0

        frame = PosteriorFrame(trace.frames_total, scores, c.blank_id)
        frame = deweight_blank(frame, params.beta_blank)
        trace.frames_total += 1
        y = _greedy_label(frame.scores)
        if y != c.blank_id:
            trace.emitted_phones.append(y)
            pred_state.advance(y)
            t0 = time.perf_counter_ns()
            h_pred = nnet.predictor_step(model, pred_state)
            trace.encoder_ns += time.perf_counter_ns() - t0
        if is_blank_frame(frame, params.gamma_blank):
            trace.frames_skipped += 1
            continue
        trace.wfst_steps += 1
        if graph is not None:
            t0 = time.perf_counter_ns()
            tokens = wfst.beam_search_step(graph, tokens, frame, prior, params)
            trace.search_ns += time.perf_counter_ns() - t0

    hyp = _finish(graph, tokens, trace)
    trace.check()
    return hyp, trace


def _check_graph_alphabet(graph: wfst.Fst, config: nnet.ModelConfig) -> None:
    used = graph.used_ilabels() - {wfst.EPSILON}
    bad = [l for l in used if not 0 <= l < config.num_labels or l == config.blank_id]
    if bad:
        raise wfst.AlphabetError(
            f"graph input labels {sorted(bad)[:5]} outside the model's phone set "
            f"(num_labels={config.num_labels}, blank_id={config.blank_id})")


def trace_report(utt_id: str, trace: DecodeTrace) -> str:
    """One line-oriented key=value record per utterance."""
    alpha = blank_rate(trace)
    return (f"utt={utt_id} frames_total={trace.frames_total} "
            f"frames_skipped={trace.frames_skipped} wfst_steps={trace.wfst_steps} "
            f"blank_rate={alpha:.6f} emitted={len(trace.emitted_phones)} "
            f"encoder_ns={trace.encoder_ns} search_ns={trace.search_ns}")
