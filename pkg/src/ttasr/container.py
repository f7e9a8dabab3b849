"""TTRD model container.

Layout: magic ``TTRD``, one version byte, a u32-LE length-prefixed UTF-8 JSON
metadata document (config fields, ordered tensor manifest, low-rank records),
then tensor payloads in manifest order, row-major little-endian. f32 tensors
are raw; int8 tensors are preceded by a per-output-row f32 scale array.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .nnet import (ConvLayer, DenseMap, DfsmnLayer, LowRankMap, ModelConfig,
                   QuantMap, TransducerModel)

MAGIC = b"TTRD"
VERSION = 1


class ModelFormatError(Exception):
    code = "format"


class MagicError(ModelFormatError):
    code = "bad_magic"


class VersionError(ModelFormatError):
    code = "bad_version"


class ShapeMismatchError(ModelFormatError):
    code = "bad_shape"


class TruncatedError(ModelFormatError):
    code = "truncated"


def _manifest_entry(name: str, arr: np.ndarray, dtype: str) -> dict:
    return {"name": name, "shape": list(arr.shape), "dtype": dtype}


def _emit_map(name: str, m, manifest: list, payloads: list, svd_meta: dict) -> None:
    if isinstance(m, LowRankMap):
        svd_meta[name] = {"shape": list(m.shape), "rank": int(m.rank)}
        _emit_map(name + ".a", m.a, manifest, payloads, svd_meta)
        _emit_map(name + ".b", m.b, manifest, payloads, svd_meta)
    elif isinstance(m, QuantMap):
        manifest.append(_manifest_entry(name, m.q, "int8"))
        payloads.append(m.scale.astype("<f4").tobytes())
        payloads.append(m.q.astype("|i1").tobytes())
    else:
        manifest.append(_manifest_entry(name, m.w, "f32"))
        payloads.append(m.w.astype("<f4").tobytes())


def _emit_f32(name: str, arr: np.ndarray, manifest: list, payloads: list) -> None:
    manifest.append(_manifest_entry(name, arr, "f32"))
    payloads.append(arr.astype("<f4").tobytes())


def save_model(model: TransducerModel) -> bytes:
    model.validate()
    manifest: list[dict] = []
    payloads: list[bytes] = []
    svd_meta: dict[str, dict] = {}

    for i, conv in enumerate(model.subsampler):
        _emit_f32(f"subsampler.{i}.weight", conv.weight, manifest, payloads)
        _emit_f32(f"subsampler.{i}.bias", conv.bias, manifest, payloads)
    for i, layer in enumerate(model.dfsmn):
        _emit_map(f"dfsmn.{i}.in_proj", layer.in_proj, manifest, payloads, svd_meta)
        _emit_f32(f"dfsmn.{i}.taps", layer.taps, manifest, payloads)
        _emit_map(f"dfsmn.{i}.out_proj", layer.out_proj, manifest, payloads, svd_meta)
        _emit_f32(f"dfsmn.{i}.bias", layer.bias, manifest, payloads)
    _emit_f32("embedding.weight", model.embedding, manifest, payloads)
    _emit_f32("predictor.conv.weight", model.predictor_w, manifest, payloads)
    _emit_f32("predictor.conv.bias", model.predictor_b, manifest, payloads)
    _emit_f32("joint.w_enc", model.joint_w_enc, manifest, payloads)
    _emit_f32("joint.w_pred", model.joint_w_pred, manifest, payloads)
    _emit_f32("joint.bias", model.joint_b, manifest, payloads)
    _emit_f32("joint.w_out", model.joint_w_out, manifest, payloads)
    _emit_f32("joint.bias_out", model.joint_b_out, manifest, payloads)

    meta = {"config": model.config.as_dict(), "tensors": manifest}
    if svd_meta:
        meta["svd"] = svd_meta
    doc = json.dumps(meta, separators=(",", ":")).encode("utf-8")
    return MAGIC + bytes([VERSION]) + struct.pack("<I", len(doc)) + doc + b"".join(payloads)


class _Reader:
    def __init__(self, buf: bytes, offset: int):
        self.buf = buf
        self.offset = offset

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.buf):
            raise TruncatedError(
                f"payload ends at byte {len(self.buf)}, needed {self.offset + n}")
        chunk = self.buf[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def tensor(self, entry: dict) -> np.ndarray | QuantMap:
        shape = tuple(int(x) for x in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        dtype = entry["dtype"]
        if dtype == "f32":
            raw = self.take(4 * count)
            return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        if dtype == "int8":
            if len(shape) != 2:
                raise ShapeMismatchError(f"int8 tensor {entry['name']} must be 2-D")
            scale = np.frombuffer(self.take(4 * shape[0]), dtype="<f4").copy()
            q = np.frombuffer(self.take(count), dtype="|i1").reshape(shape).copy()
            return QuantMap(q, scale)
        raise ShapeMismatchError(f"unknown dtype {dtype!r} for tensor {entry['name']}")


def _as_array(t) -> np.ndarray:
    if isinstance(t, QuantMap):
        raise ShapeMismatchError("tensor must be f32, found int8")
    return t


def _as_map(t) -> DenseMap | QuantMap:
    return t if isinstance(t, QuantMap) else DenseMap(t)


def load_model(data: bytes) -> TransducerModel:
    if len(data) < 9:
        raise TruncatedError("file shorter than the fixed header")
    if data[:4] != MAGIC:
        raise MagicError(f"bad magic {data[:4]!r}")
    if data[4] != VERSION:
        raise VersionError(f"unsupported container version {data[4]}")
    (meta_len,) = struct.unpack("<I", data[5:9])
    if 9 + meta_len > len(data):
        raise TruncatedError("metadata extends past end of file")
    try:
        meta = json.loads(data[9:9 + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"unreadable metadata: {exc}") from exc
    try:
        config = ModelConfig(**meta["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeMismatchError(f"bad config: {exc}") from exc

    tensors: dict[str, np.ndarray | QuantMap] = {}
    reader = _Reader(data, 9 + meta_len)
    for entry in meta.get("tensors", []):
        tensors[entry["name"]] = reader.tensor(entry)
    if reader.offset != len(data):
        raise TruncatedError("trailing bytes after final tensor payload")

    def pick(name: str):
        try:
            return tensors.pop(name)
        except KeyError:
            raise ShapeMismatchError(f"missing tensor {name!r}") from None

    def pick_map(name: str):
        if name + ".a" in tensors:
            a = _as_map(pick(name + ".a"))
            b = _as_map(pick(name + ".b"))
            if a.shape[1] != b.shape[0]:
                raise ShapeMismatchError(
                    f"{name}: factor shapes {a.shape} and {b.shape} do not chain")
            return LowRankMap(a, b)
        return _as_map(pick(name))

    subsampler = [ConvLayer(_as_array(pick(f"subsampler.{i}.weight")),
                            _as_array(pick(f"subsampler.{i}.bias"))) for i in range(2)]
    dfsmn = [DfsmnLayer(pick_map(f"dfsmn.{i}.in_proj"),
                        _as_array(pick(f"dfsmn.{i}.taps")),
                        pick_map(f"dfsmn.{i}.out_proj"),
                        _as_array(pick(f"dfsmn.{i}.bias")))
             for i in range(config.num_dfsmn_layers)]
    model = TransducerModel(
        config=config,
        subsampler=subsampler,
        dfsmn=dfsmn,
        embedding=_as_array(pick("embedding.weight")),
        predictor_w=_as_array(pick("predictor.conv.weight")),
        predictor_b=_as_array(pick("predictor.conv.bias")),
        joint_w_enc=_as_array(pick("joint.w_enc")),
        joint_w_pred=_as_array(pick("joint.w_pred")),
        joint_b=_as_array(pick("joint.bias")),
        joint_w_out=_as_array(pick("joint.w_out")),
        joint_b_out=_as_array(pick("joint.bias_out")),
    )
    if tensors:
        raise ShapeMismatchError(f"unexpected tensors: {sorted(tensors)}")
    try:
        model.validate()
    except ValueError as exc:
        raise ShapeMismatchError(str(exc)) from exc
    return model


def load_model_file(path) -> TransducerModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())


def save_model_file(model: TransducerModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(model))
