"""Feature-file I/O.

Two on-disk forms: a raw binary frame stream (little-endian f32, frame-major,
conventionally ``.f32``) and a text matrix (one frame per line, space
separated). The binary form needs the model's feature dimension to recover
the frame boundaries.
"""

from __future__ import annotations

import os

import numpy as np


def read_features(path: str | os.PathLike, feat_dim: int) -> np.ndarray:
    path = os.fspath(path)
    if path.endswith(".f32") or path.endswith(".bin"):
        raw = np.fromfile(path, dtype="<f4")
        if raw.size % feat_dim != 0:
            raise ValueError(
                f"{path}: {raw.size} values do not divide into {feat_dim}-dim frames")
        return raw.reshape(-1, feat_dim)
    mat = np.loadtxt(path, dtype=np.float32, ndmin=2)
    if mat.size == 0:
        return np.zeros((0, feat_dim), dtype=np.float32)
    if mat.shape[1] != feat_dim:
        raise ValueError(f"{path}: frames have {mat.shape[1]} dims, expected {feat_dim}")
    return mat


def write_features(path: str | os.PathLike, frames: np.ndarray) -> None:
    path = os.fspath(path)
    frames = np.asarray(frames, dtype="<f4")
    if path.endswith(".f32") or path.endswith(".bin"):
        frames.tofile(path)
    else:
        np.savetxt(path, frames, fmt="%.8g")


def utt_id_for(path: str | os.PathLike) -> str:
    base = os.path.basename(os.fspath(path))
    return base.rsplit(".", 1)[0] if "." in base else base
