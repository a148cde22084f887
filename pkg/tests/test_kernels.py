"""The numba and numpy kernels must agree."""
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memstdp import _backend, kernels
from memstdp.neuron import LIFParams, SynapticKernel
from memstdp.waveform import WaveformParams

pytestmark = pytest.mark.skipif(not _backend.HAVE_NUMBA, reason="numba not installed")
P = LIFParams()


def random_problem(seed, n_in=20, n_out=5, nsteps=600, vpre=False):
    rng = np.random.default_rng(seed)
    steps = rng.integers(0, nsteps, 60)
    ptr, idx = kernels.events_csr(steps, rng.integers(0, n_in, 60), nsteps)
    W = rng.uniform(-2e-9, 12e-9, (n_in, n_out))
    k = SynapticKernel.from_waveform(WaveformParams()) if vpre else P.kernel
    return ptr, idx, W, k.arrays(P.dt)


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.booleans(), st.booleans())
def test_lif_network_backends_agree(seed, vpre, with_ext):
    ptr, idx, W, (a, d, dl) = random_problem(seed, vpre=vpre)
    nsteps = len(ptr) - 1
    ext = (np.random.default_rng(seed).uniform(0, 3e-9, (nsteps, W.shape[1])) if with_ext
           else np.zeros((0, W.shape[1])))
    theta = np.full(W.shape[1], P.theta)
    args = (ext, ptr, idx, W, a, d, dl, theta, np.full(W.shape[1], P.EL), P.dt * 1e-3,
            P.Cm, P.gL, P.EL, P.ref_steps, True)
    r1, t1 = kernels.lif_network(*args, backend="numba")
    r2, t2 = kernels.lif_network(*args, backend="numpy")
    np.testing.assert_array_equal(r1, r2)
    np.testing.assert_allclose(t1, t2, rtol=0, atol=1e-12)


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_wta_advance_backends_agree(seed):
    ptr, idx, W, (a, d, dl) = random_problem(seed)
    theta = np.full(W.shape[1], P.theta)
    results = []
    for backend in ("numba", "numpy"):
        V = np.full(W.shape[1], P.EL)
        tr = np.zeros((len(a), W.shape[1]))
        hold = np.zeros(W.shape[1], dtype=np.int64)
        k, out = 0, []
        while True:
            k, j = kernels.wta_advance(k, ptr, idx, W, a, d, dl, V, tr, hold, theta,
                                       P.dt * 1e-3, P.Cm, P.gL, P.EL, backend)
            if k < 0:
                break
            out.append((k, j))
            V[:] = P.EL
            hold[:] = 30
        results.append((out, V.copy(), tr.copy()))
    assert results[0][0] == results[1][0]
    np.testing.assert_allclose(results[0][1], results[1][1], atol=1e-12)
    np.testing.assert_allclose(results[0][2], results[1][2], rtol=1e-12, atol=1e-24)


def test_events_csr_drops_out_of_range_and_sorts():
    ptr, idx = kernels.events_csr([3, 1, 1, 9, -1], [0, 2, 1, 4, 5], 5)
    assert list(ptr) == [0, 0, 2, 2, 3, 3]
    assert list(idx) == [1, 2, 0]


def test_backend_resolution():
    assert _backend.resolve("numpy") == "numpy"
    with pytest.raises(ValueError):
        _backend.resolve("cuda")


@pytest.mark.parametrize("flag,expect", [("numpy", "numpy"), ("auto", "numba")])
def test_env_flag_selects_default(flag, expect):
    out = subprocess.run(
        [sys.executable, "-c", "from memstdp import _backend; print(_backend.DEFAULT_BACKEND)"],
        env={"MEMSTDP_BACKEND": flag, "PATH": ""}, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expect


def test_env_flag_rejects_unknown_value():
    out = subprocess.run([sys.executable, "-c", "import memstdp._backend"],
                         env={"MEMSTDP_BACKEND": "gpu"}, capture_output=True, text=True)
    assert out.returncode != 0 and "MEMSTDP_BACKEND" in out.stderr
