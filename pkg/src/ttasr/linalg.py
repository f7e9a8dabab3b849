"""Small dense linear algebra layer shared by the whole engine.

Matrices are plain 2-D numpy arrays (row-major). Decoder-side scores live in
the natural-log domain after :func:`log_scores`; nothing downstream
renormalizes, so the blank deweight stays an exact subtraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Operand dimensions do not match."""


class DomainError(ValueError):
    """Input value outside the mathematical domain of the operation."""


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product with explicit shape checking."""
    m = np.asarray(m)
    v = np.asarray(v)
    if m.ndim != 2 or v.ndim != 1:
        raise ShapeError(f"expected 2-D matrix and 1-D vector, got {m.shape} and {v.shape}")
    if m.shape[1] != v.shape[0]:
        raise ShapeError(f"matrix has {m.shape[1]} cols but vector has {v.shape[0]} entries")
    return m @ v


@dataclass
class SvdFactors:
    """Thin SVD of a matrix: u (m, k), s (k,) descending, vt (k, n)."""

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.vt

    def truncate(self, k: int) -> "SvdFactors":
        if k < 1:
            raise ValueError(f"rank must be >= 1, got {k}")
        k = min(k, self.s.shape[0])
        return SvdFactors(self.u[:, :k], self.s[:k], self.vt[:k, :])


def svd(m: np.ndarray) -> SvdFactors:
    """Thin SVD with singular values sorted descending.

    Reconstruction is exact to 1e-4 max-abs at full rank (the engine stores
    weights in f32; the decomposition runs in f64).
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.size == 0:
        raise ShapeError(f"svd needs a nonempty 2-D matrix, got shape {m.shape}")
    u, s, vt = np.linalg.svd(m.astype(np.float64), full_matrices=False)
    return SvdFactors(u, s, vt)


def energy_rank(s: np.ndarray, rho: float) -> int:
    """Smallest k whose leading singular values hold >= rho of total energy."""
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"energy threshold must be in (0, 1], got {rho}")
    energies = np.asarray(s, dtype=np.float64) ** 2
    total = energies.sum()
    if total == 0.0:
        return 1
    cum = np.cumsum(energies)
    return int(np.searchsorted(cum, rho * total - 1e-12) + 1)


def log_scores(raw: np.ndarray) -> np.ndarray:
    """Elementwise natural log of softmax-domain scores; no renormalization."""
    raw = np.asarray(raw)
    if raw.size and raw.min() <= 0.0:
        raise DomainError("log_scores requires strictly positive entries")
    return np.log(raw)
