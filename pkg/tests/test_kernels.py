"""Both kernel flavours must agree; the public binding follows TT_BACKEND."""

import numpy as np
import pytest

from ttasr import kernels
from ttasr.backend import USE_NUMBA, backend_name


def test_backend_reports_a_name():
    assert backend_name() in ("numba", "numpy")
    assert (backend_name() == "numba") == USE_NUMBA


@pytest.mark.parametrize("seed", range(5))
def test_dfsmn_step_flavours_agree(seed):
    rng = np.random.default_rng(seed)
    window = rng.standard_normal((11, 16)).astype(np.float32)
    taps = rng.standard_normal((11, 16)).astype(np.float32)
    out_proj = rng.standard_normal((24, 16)).astype(np.float32)
    bias = rng.standard_normal(24).astype(np.float32)
    x = rng.standard_normal(24).astype(np.float32)
    a = kernels._dfsmn_step_np(window, taps, out_proj, bias, x)
    b = kernels._dfsmn_step_loops(window, taps, out_proj, bias, x)
    c = kernels.dfsmn_step(window, taps, out_proj, bias, x)
    assert np.allclose(a, b, atol=2e-4)
    assert np.allclose(a, c, atol=2e-4)


@pytest.mark.parametrize("seed", range(5))
def test_qmatvec_flavours_agree(seed):
    rng = np.random.default_rng(seed)
    q = rng.integers(-127, 128, size=(12, 20)).astype(np.int8)
    scale = (rng.random(12) + 0.1).astype(np.float32)
    x = rng.standard_normal(20).astype(np.float32)
    a = kernels._qmatvec_np(q, scale, x)
    b = kernels._qmatvec_loops(q, scale, x)
    c = kernels.qmatvec(q, scale, x)
    assert np.allclose(a, b, rtol=1e-5)
    assert np.allclose(a, c, rtol=1e-5)


@pytest.mark.parametrize("seed", range(20))
def test_levenshtein_flavours_agree(seed):
    rng = np.random.default_rng(seed)
    ref = rng.integers(0, 3, size=rng.integers(0, 9)).astype(np.int32)
    hyp = rng.integers(0, 3, size=rng.integers(0, 9)).astype(np.int32)
    assert (kernels._levenshtein_counts_np(ref, hyp)
            == tuple(kernels._levenshtein_counts_loops(ref, hyp)))
    assert tuple(kernels.levenshtein_counts(ref, hyp)) \
        == kernels._levenshtein_counts_np(ref, hyp)
