"""Kernel backend selection.

The hot numeric loops in :mod:`ttasr.kernels` exist twice: a numba-jitted
version and a pure-numpy fallback. ``TT_BACKEND`` picks one at import time:

* ``TT_BACKEND=numba`` (or unset, when numba imports) -- jitted kernels
* ``TT_BACKEND=numpy`` -- force the numpy fallbacks

``benchmarks/kernel_bench.py`` times both paths side by side.
"""

from __future__ import annotations

import os

_requested = os.environ.get("TT_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(f"TT_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

if _requested == "numba" and not HAVE_NUMBA:  # pragma: no cover
    raise ImportError("TT_BACKEND=numba requested but numba is not importable")

USE_NUMBA = HAVE_NUMBA and _requested != "numpy"


def njit(func):
    """Jit a kernel when the numba backend is active, else return it as-is.

    fastmath lets LLVM vectorize the reductions; the float32 reassociation it
    allows shifts results by ~1e-5, well inside every contract tolerance.
    """
    if USE_NUMBA:
        return numba.njit(cache=True, fastmath=True)(func)
    return func


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
