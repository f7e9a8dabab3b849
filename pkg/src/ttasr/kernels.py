"""Hot numeric kernels, each in two flavours.

``*_loops`` variants are plain-loop implementations meant for numba; the
``*_np`` variants are vectorized numpy fallbacks. The public names bind to
one or the other depending on :mod:`ttasr.backend`.
"""

from __future__ import annotations

import numpy as np

from .backend import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# Memory-layer step: tap-weighted combine over a window of projected frames,
# output projection, bias, and the skip connection from the layer input.
# window/taps: (K, P); out_proj: (E, P); bias, x, result: (E,)


def _dfsmn_step_loops(window, taps, out_proj, bias, x):
    k, p = window.shape
    e = out_proj.shape[0]
    mem = np.zeros(p, dtype=window.dtype)
    for i in range(k):
        for j in range(p):
            mem[j] += taps[i, j] * window[i, j]
    out = np.empty(e, dtype=window.dtype)
    for r in range(e):
        acc = bias[r] + x[r]
        row = out_proj[r]
        for j in range(p):
            acc += row[j] * mem[j]
        out[r] = acc
    return out


def _dfsmn_step_np(window, taps, out_proj, bias, x):
    mem = (taps * window).sum(axis=0)
    return out_proj @ mem + bias + x


# ---------------------------------------------------------------------------
# Int8 matrix-vector product with per-output-row symmetric scales.
# q: (R, C) int8; scale: (R,) f32; x: (C,) f32


def _qmatvec_loops(q, scale, x):
    r, c = q.shape
    out = np.empty(r, dtype=x.dtype)
    for i in range(r):
        acc = np.float32(0.0)
        row = q[i]
        for j in range(c):
            acc += np.float32(row[j]) * x[j]
        out[i] = acc * scale[i]
    return out


def _qmatvec_np(q, scale, x):
    return (q.astype(x.dtype) @ x) * scale


# ---------------------------------------------------------------------------
# Levenshtein alignment with a deterministic backtrace: among equal-cost
# choices prefer match/substitution, then deletion, then insertion.
# Returns (substitutions, deletions, insertions).


def _levenshtein_counts_loops(ref, hyp):
    n = ref.shape[0]
    m = hyp.shape[0]
    d = np.empty((n + 1, m + 1), dtype=np.int32)
    for i in range(n + 1):
        d[i, 0] = i
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            best = d[i - 1, j - 1] + cost
            if d[i - 1, j] + 1 < best:
                best = d[i - 1, j] + 1
            if d[i, j - 1] + 1 < best:
                best = d[i, j - 1] + 1
            d[i, j] = best
    subs = 0
    dels = 0
    ins = 0
    i = n
    j = m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] and ref[i - 1] == hyp[j - 1]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + 1 and ref[i - 1] != hyp[j - 1]:
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return subs, dels, ins


def _levenshtein_counts_np(ref, hyp):
    n = ref.shape[0]
    m = hyp.shape[0]
    d = np.empty((n + 1, m + 1), dtype=np.int32)
    d[0] = np.arange(m + 1)
    d[:, 0] = np.arange(n + 1)
    cols = np.arange(m, dtype=np.int32)
    for i in range(1, n + 1):
        sub = d[i - 1, :-1] + (ref[i - 1] != hyp)
        up = d[i - 1, 1:] + 1
        row = np.minimum(sub, up)
        # fold in the left-neighbour term: a prefix-min over row[k] + (j - k)
        row = np.minimum(row, d[i, 0] + 1 + cols)
        d[i, 1:] = np.minimum.accumulate(row - cols) + cols
    subs = 0
    dels = 0
    ins = 0
    i = n
    j = m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] and ref[i - 1] == hyp[j - 1]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + 1 and ref[i - 1] != hyp[j - 1]:
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return int(subs), int(dels), int(ins)


if USE_NUMBA:
    dfsmn_step = njit(_dfsmn_step_loops)
    qmatvec = njit(_qmatvec_loops)
    levenshtein_counts = njit(_levenshtein_counts_loops)
else:
    dfsmn_step = _dfsmn_step_np
    qmatvec = _qmatvec_np
    levenshtein_counts = _levenshtein_counts_np
