"""Streaming transducer forward pass.

The model is immutable after load and shared freely; every decoding stream
owns its own :class:`EncoderState` / :class:`PredictorState`.

Structure: two causal stride-2 conv layers subsample time by four, a stack of
memory layers (projection down, tap-weighted combine over a finite window,
projection up, skip connection) forms the encoder, an embedding plus a causal
width-M conv forms the stateless predictor, and a tanh joint with a softmax
output head scores the label set per (frame, history) pair.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, fields
from typing import Union

import numpy as np

from . import kernels
from .linalg import ShapeError


@dataclass(frozen=True)
class ModelConfig:
    feat_dim: int = 40
    encoder_dim: int = 400
    num_dfsmn_layers: int = 8
    dfsmn_left: int = 8
    dfsmn_right: int = 2
    dfsmn_proj_dim: int = 144
    joint_dim: int = 100
    embed_dim: int = 100
    pred_dim: int = 100
    predictor_context: int = 4
    num_labels: int = 211
    blank_id: int = 0
    subsample_factor: int = 4

    def __post_init__(self):
        if self.num_labels < 2:
            raise ValueError(f"num_labels must be >= 2, got {self.num_labels}")
        if not 0 <= self.blank_id < self.num_labels:
            raise ValueError(f"blank_id {self.blank_id} outside [0, {self.num_labels})")
        if self.dfsmn_left < 0 or self.dfsmn_right < 0:
            raise ValueError("memory context sizes must be >= 0")
        if self.subsample_factor != 4:
            raise ValueError("subsample_factor is fixed at 4 (two stride-2 conv layers)")
        if self.predictor_context < 1:
            raise ValueError("predictor_context must be >= 1")
        for name in ("feat_dim", "encoder_dim", "num_dfsmn_layers", "dfsmn_proj_dim",
                     "joint_dim", "embed_dim", "pred_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def sos_id(self) -> int:
        # reserved start-of-sequence id; the embedding carries one extra row for it
        return self.num_labels

    @property
    def memory_order(self) -> int:
        return self.dfsmn_left + 1 + self.dfsmn_right

    @property
    def total_lookahead(self) -> int:
        return self.num_dfsmn_layers * self.dfsmn_right

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# ---------------------------------------------------------------------------
# Projection slots. The memory-layer projections are the only compressible
# weights: they may be stored dense (f32), quantized (int8 + per-row scales),
# or as a low-rank factor pair of either.


@dataclass
class DenseMap:
    w: np.ndarray  # (out, in) f32

    @property
    def shape(self):
        return self.w.shape

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.w @ v

    def dense(self) -> np.ndarray:
        return self.w

    def param_count(self) -> int:
        return self.w.size


@dataclass
class QuantMap:
    q: np.ndarray      # (out, in) int8
    scale: np.ndarray  # (out,) f32

    @property
    def shape(self):
        return self.q.shape

    def apply(self, v: np.ndarray) -> np.ndarray:
        return kernels.qmatvec(self.q, self.scale, v)

    def dense(self) -> np.ndarray:
        return self.q.astype(np.float32) * self.scale[:, None]

    def param_count(self) -> int:
        return self.q.size

    @classmethod
    def from_dense(cls, w: np.ndarray) -> "QuantMap":
        absmax = np.abs(w).max(axis=1)
        scale = np.where(absmax > 0, absmax / 127.0, 1.0).astype(np.float32)
        q = np.clip(np.rint(w / scale[:, None]), -127, 127).astype(np.int8)
        return cls(q, scale)


@dataclass
class LowRankMap:
    a: Union[DenseMap, QuantMap]  # (out, k)
    b: Union[DenseMap, QuantMap]  # (k, in)

    @property
    def shape(self):
        return (self.a.shape[0], self.b.shape[1])

    @property
    def rank(self) -> int:
        return self.a.shape[1]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.a.apply(self.b.apply(v))

    def dense(self) -> np.ndarray:
        return self.a.dense() @ self.b.dense()

    def param_count(self) -> int:
        return self.a.param_count() + self.b.param_count()


LinearMap = Union[DenseMap, QuantMap, LowRankMap]


@dataclass
class ConvLayer:
    weight: np.ndarray  # (out, in, kernel=3)
    bias: np.ndarray    # (out,)

    def apply(self, window: np.ndarray) -> np.ndarray:
        # window: (kernel, in); causal, newest frame last
        w = self.weight
        acc = self.bias.copy()
        for j in range(w.shape[2]):
            acc += w[:, :, j] @ window[j]
        return np.maximum(acc, 0.0)

    def param_count(self) -> int:
        return self.weight.size + self.bias.size


@dataclass
class DfsmnLayer:
    in_proj: LinearMap   # (proj, enc)
    taps: np.ndarray     # (left + 1 + right, proj)
    out_proj: LinearMap  # (enc, proj)
    bias: np.ndarray     # (enc,)

    def param_count(self) -> int:
        return (self.in_proj.param_count() + self.taps.size
                + self.out_proj.param_count() + self.bias.size)


@dataclass
class TransducerModel:
    config: ModelConfig
    subsampler: list[ConvLayer]
    dfsmn: list[DfsmnLayer]
    embedding: np.ndarray       # (num_labels + 1, embed_dim); last row = start symbol
    predictor_w: np.ndarray     # (pred_dim, embed_dim, M)
    predictor_b: np.ndarray     # (pred_dim,)
    joint_w_enc: np.ndarray     # (joint_dim, encoder_dim)
    joint_w_pred: np.ndarray    # (joint_dim, pred_dim)
    joint_b: np.ndarray         # (joint_dim,)
    joint_w_out: np.ndarray     # (num_labels, joint_dim)
    joint_b_out: np.ndarray     # (num_labels,)

    def param_count(self) -> int:
        n = sum(layer.param_count() for layer in self.subsampler)
        n += sum(layer.param_count() for layer in self.dfsmn)
        n += self.embedding.size
        n += self.predictor_w.size + self.predictor_b.size
        n += (self.joint_w_enc.size + self.joint_w_pred.size + self.joint_b.size
              + self.joint_w_out.size + self.joint_b_out.size)
        return n

    def validate(self) -> None:
        c = self.config
        if len(self.subsampler) != 2:
            raise ShapeError("expected exactly two subsampler conv layers")
        expect = [
            (self.subsampler[0].weight, (c.encoder_dim, c.feat_dim, 3)),
            (self.subsampler[0].bias, (c.encoder_dim,)),
            (self.subsampler[1].weight, (c.encoder_dim, c.encoder_dim, 3)),
            (self.subsampler[1].bias, (c.encoder_dim,)),
            (self.embedding, (c.num_labels + 1, c.embed_dim)),
            (self.predictor_w, (c.pred_dim, c.embed_dim, c.predictor_context)),
            (self.predictor_b, (c.pred_dim,)),
            (self.joint_w_enc, (c.joint_dim, c.encoder_dim)),
            (self.joint_w_pred, (c.joint_dim, c.pred_dim)),
            (self.joint_b, (c.joint_dim,)),
            (self.joint_w_out, (c.num_labels, c.joint_dim)),
            (self.joint_b_out, (c.num_labels,)),
        ]
        if len(self.dfsmn) != c.num_dfsmn_layers:
            raise ShapeError(
                f"expected {c.num_dfsmn_layers} memory layers, got {len(self.dfsmn)}")
        for i, layer in enumerate(self.dfsmn):
            if tuple(layer.in_proj.shape) != (c.dfsmn_proj_dim, c.encoder_dim):
                raise ShapeError(f"dfsmn.{i}.in_proj has shape {layer.in_proj.shape}")
            if tuple(layer.out_proj.shape) != (c.encoder_dim, c.dfsmn_proj_dim):
                raise ShapeError(f"dfsmn.{i}.out_proj has shape {layer.out_proj.shape}")
            expect.append((layer.taps, (c.memory_order, c.dfsmn_proj_dim)))
            expect.append((layer.bias, (c.encoder_dim,)))
        for arr, shape in expect:
            if tuple(arr.shape) != shape:
                raise ShapeError(f"tensor shape {tuple(arr.shape)} != expected {shape}")
        for arr, _ in expect:
            if not np.isfinite(arr).all():
                raise ValueError("model contains non-finite weights")


# ---------------------------------------------------------------------------
# Streaming state


class _ConvState:
    """Causal stride-2 conv over time: output i sees inputs 2i-2, 2i-1, 2i."""

    def __init__(self, layer: ConvLayer):
        self.layer = layer
        in_dim = layer.weight.shape[1]
        self.window = np.zeros((3, in_dim), dtype=np.float32)
        self.n = 0

    def push(self, x: np.ndarray):
        self.window[0] = self.window[1]
        self.window[1] = self.window[2]
        self.window[2] = x
        out = self.layer.apply(self.window) if self.n % 2 == 0 else None
        self.n += 1
        return out


class _DfsmnState:
    """One memory layer; emits position n - right when position n arrives."""

    def __init__(self, layer: DfsmnLayer, left: int, right: int):
        self.layer = layer
        self.left = left
        self.right = right
        proj_dim = layer.taps.shape[1]
        self.window = np.zeros((left + 1 + right, proj_dim), dtype=np.float32)
        self.pending = deque()
        self.n = 0

    def push(self, x: np.ndarray):
        self.window[:-1] = self.window[1:]
        self.window[-1] = self.layer.in_proj.apply(x)
        self.pending.append(x)
        out = None
        if self.n >= self.right:
            x_center = self.pending.popleft()
            out_proj = self.layer.out_proj
            if isinstance(out_proj, DenseMap):
                out = kernels.dfsmn_step(
                    self.window, self.layer.taps, out_proj.w, self.layer.bias, x_center)
            else:
                mem = (self.layer.taps * self.window).sum(axis=0).astype(np.float32)
                out = out_proj.apply(mem) + self.layer.bias + x_center
        self.n += 1
        return out


class EncoderState:
    """Streaming buffers for one utterance; reset() restores the zero state."""

    def __init__(self, model: TransducerModel):
        self.model = model
        self.reset()

    def reset(self) -> None:
        c = self.model.config
        self.convs = [_ConvState(layer) for layer in self.model.subsampler]
        self.layers = [_DfsmnState(layer, c.dfsmn_left, c.dfsmn_right)
                       for layer in self.model.dfsmn]
        self.frames_consumed = 0
        self.subsampled_consumed = 0
        self.frames_emitted = 0
        self.flushed = False

    def _through_layers(self, vec: np.ndarray, start: int):
        for state in self.layers[start:]:
            vec = state.push(vec)
            if vec is None:
                return None
        return vec


class PredictorState:
    """Last M emitted non-blank labels, oldest first; starts as all-SOS."""

    def __init__(self, model: TransducerModel):
        c = model.config
        self.history = deque([c.sos_id] * c.predictor_context,
                             maxlen=c.predictor_context)

    def advance(self, label: int) -> None:
        self.history.append(label)


# ---------------------------------------------------------------------------
# Forward operations


def encoder_push(model: TransducerModel, state: EncoderState,
                 frame: np.ndarray) -> list[np.ndarray]:
    """Feed one feature frame; returns 0 or 1 encoder vectors."""
    frame = np.asarray(frame, dtype=np.float32)
    if frame.shape != (model.config.feat_dim,):
        raise ShapeError(
            f"frame has shape {frame.shape}, expected ({model.config.feat_dim},)")
    state.frames_consumed += 1
    v = state.convs[0].push(frame)
    if v is None:
        return []
    v = state.convs[1].push(v)
    if v is None:
        return []
    state.subsampled_consumed += 1
    out = state._through_layers(v, 0)
    if out is None:
        return []
    state.frames_emitted += 1
    return [out]


def encoder_flush(model: TransducerModel, state: EncoderState) -> list[np.ndarray]:
    """Drain the right-context lookahead, padding future frames with zeros."""
    if state.flushed:
        return []
    state.flushed = True
    c = model.config
    outs: list[np.ndarray] = []
    zero = np.zeros(c.encoder_dim, dtype=np.float32)
    for i in range(len(state.layers)):
        for _ in range(c.dfsmn_right):
            v = state.layers[i].push(zero)
            if v is None:
                continue
            v = state._through_layers(v, i + 1)
            if v is not None:
                outs.append(v)
    state.frames_emitted += len(outs)
    return outs


def predictor_step(model: TransducerModel, state: PredictorState) -> np.ndarray:
    """Pure function of (model, last-M history): embed, causal conv."""
    w = model.predictor_w
    acc = model.predictor_b.copy()
    for j, label in enumerate(state.history):
        acc += w[:, :, j] @ model.embedding[label]
    return acc


def joint_step(model: TransducerModel, h_enc: np.ndarray,
               h_pred: np.ndarray) -> np.ndarray:
    """Softmax-domain scores over the label set for one (frame, history) pair."""
    c = model.config
    if h_enc.shape != (c.encoder_dim,):
        raise ShapeError(f"encoder vector has shape {h_enc.shape}")
    if h_pred.shape != (c.pred_dim,):
        raise ShapeError(f"predictor vector has shape {h_pred.shape}")
    z = np.tanh(model.joint_w_enc @ h_enc + model.joint_w_pred @ h_pred + model.joint_b)
    logits = model.joint_w_out @ z + model.joint_b_out
    logits = logits - logits.max()
    e = np.exp(logits)
    return e / e.sum()
