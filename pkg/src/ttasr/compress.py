"""Model compression: low-rank factorization and int8 quantization.

Both transforms touch only the memory-layer projection matrices, which hold
the bulk of the parameters; everything else passes through untouched. The
result is a valid container loadable by the normal model loader.
"""

from __future__ import annotations

import fnmatch
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .linalg import energy_rank, svd
from .nnet import DenseMap, DfsmnLayer, LowRankMap, QuantMap, TransducerModel

log = logging.getLogger("ttasr.compress")

DEFAULT_TARGETS = ("dfsmn.*.in_proj", "dfsmn.*.out_proj")


@dataclass(frozen=True)
class CompressionSpec:
    targets: tuple[str, ...] = DEFAULT_TARGETS
    rank: Optional[int] = None          # explicit rank per layer
    energy: Optional[float] = None      # or keep this fraction of squared energy
    quantize: bool = False

    def __post_init__(self):
        if self.rank is not None and self.rank < 1:
            raise ValueError(f"explicit rank must be >= 1, got {self.rank}")
        if self.energy is not None and not 0.0 < self.energy <= 1.0:
            raise ValueError(f"energy threshold must be in (0, 1], got {self.energy}")
        if self.rank is not None and self.energy is not None:
            raise ValueError("give either an explicit rank or an energy threshold")


def _projection_slots(model: TransducerModel) -> dict[str, tuple[DfsmnLayer, str]]:
    slots = {}
    for i, layer in enumerate(model.dfsmn):
        slots[f"dfsmn.{i}.in_proj"] = (layer, "in_proj")
        slots[f"dfsmn.{i}.out_proj"] = (layer, "out_proj")
    return slots


def _match_targets(model: TransducerModel, patterns) -> list[str]:
    slots = _projection_slots(model)
    names = []
    for pattern in patterns:
        hits = sorted(fnmatch.filter(slots.keys(), pattern))
        if not hits:
            raise ValueError(f"target pattern {pattern!r} matches no projection layer")
        names.extend(h for h in hits if h not in names)
    return names


def _clone(model: TransducerModel) -> TransducerModel:
    layers = [DfsmnLayer(l.in_proj, l.taps, l.out_proj, l.bias) for l in model.dfsmn]
    return replace(model, dfsmn=layers)


def svd_compress(model: TransducerModel, spec: CompressionSpec) -> TransducerModel:
    """Replace each target matrix W by a factor pair A @ B of the chosen rank.

    The singular values fold into A, so the runtime is two plain products.
    Ranks above min(m, n) clamp with a warning.
    """
    if spec.rank is None and spec.energy is None:
        raise ValueError("compression spec needs a rank or an energy threshold")
    out = _clone(model)
    slots = _projection_slots(out)
    for name in _match_targets(out, spec.targets):
        layer, attr = slots[name]
        current = getattr(layer, attr)
        if isinstance(current, LowRankMap):
            raise ValueError(f"{name} is already factorized")
        w = current.dense()
        m, n = w.shape
        factors = svd(w)
        if spec.rank is not None:
            k = spec.rank
            if k > min(m, n):
                log.warning("%s: rank %d clamped to min(m, n) = %d", name, k, min(m, n))
                k = min(m, n)
        else:
            k = energy_rank(factors.s, spec.energy)
        trunc = factors.truncate(k)
        a = (trunc.u * trunc.s).astype(np.float32)
        b = trunc.vt.astype(np.float32)
        setattr(layer, attr, LowRankMap(DenseMap(a), DenseMap(b)))
    if spec.quantize:
        out = quantize_int8(out, targets=spec.targets)
    return out


def quantize_int8(model: TransducerModel,
                  targets=DEFAULT_TARGETS) -> TransducerModel:
    """Store the target projections as int8 with per-output-row scales.

    Scale is max|row| / 127 (1.0 for all-zero rows); other layers keep f32.
    """
    out = _clone(model)
    slots = _projection_slots(out)
    for name in _match_targets(out, targets):
        layer, attr = slots[name]
        current = getattr(layer, attr)
        if isinstance(current, LowRankMap):
            quantized = LowRankMap(_quantize_map(current.a), _quantize_map(current.b))
        else:
            quantized = _quantize_map(current)
        setattr(layer, attr, quantized)
    return out


def _quantize_map(m) -> QuantMap:
    if isinstance(m, QuantMap):
        return m
    return QuantMap.from_dense(m.dense())
