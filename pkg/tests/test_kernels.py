import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elond import kernels
from elond.core import DiscountSequence
from elond.transforms import harmonic_numbers

needs_c = pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
PY = kernels.get_module("python")


def _both(name, *args):
    return getattr(PY, name)(*args), getattr(kernels.get_module("cython"), name)(*args)


def _same(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.array_equal(x, y) and x.dtype == y.dtype for x, y in zip(a, b))


@needs_c
@settings(max_examples=60)
@given(st.integers(1, 120), st.integers(0, 2**32 - 1), st.sampled_from([0, 1, 2, 3]), st.booleans())
def test_lond_family_backends_agree(T, seed, mode, with_u):
    rng = np.random.default_rng(seed)
    vals = rng.exponential(size=T) * 40 if mode == 0 else rng.random(T) ** 3
    us = 1.0 - rng.random(T) if (with_u or mode == 3) else None
    args = (vals, DiscountSequence.default().array(T), harmonic_numbers(T), 0.2, mode, us)
    assert _same(*_both("lond_family_run", *args))


@needs_c
@settings(max_examples=60)
@given(st.integers(1, 120), st.integers(0, 2**32 - 1), st.integers(0, 30), st.floats(0, 1))
def test_lordstar_backends_agree(T, seed, lag, w0):
    p = np.random.default_rng(seed).random(T) ** 3
    assert _same(*_both("lordstar_run", p, DiscountSequence.default().array(T), 0.3, w0, lag))


@needs_c
@settings(max_examples=40)
@given(st.integers(1, 30), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_coupled_stopping_backends_agree(T, N, seed):
    rng = np.random.default_rng(seed)
    W = np.exp(np.cumsum(rng.normal(0.3, 1.0, size=(T, N)), axis=1))
    ag = 0.3 * DiscountSequence.default().array(T)
    assert _same(*_both("coupled_stopping", W, ag))


@needs_c
@settings(max_examples=40)
@given(st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_wcs_backends_agree(T, seed):
    rng = np.random.default_rng(seed)
    A = rng.random(T) * 50
    w = rng.random(T) + 0.1
    assert _same(*_both("wcs_evalues", A, w, 50.0, DiscountSequence.default().array(T), 0.2))


def test_zero_level_only_rejects_infinite_evalue(backend):
    gam = np.array([0.0, 0.0])
    lv, rej = kernels.lond_family_run(np.array([1e308, np.inf]), gam, harmonic_numbers(2), 0.1, kernels.ELOND)
    assert rej.tolist() == [False, True]


def test_urlond_requires_uniforms(backend):
    with pytest.raises(ValueError):
        kernels.lond_family_run(np.array([0.1]), np.array([0.5]), np.array([1.0]), 0.1, kernels.URLOND_BY)


def test_use_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_env_var_forces_python_backend():
    env = dict(os.environ, ELOND_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import elond.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_c
def test_default_backend_is_compiled():
    env = {k: v for k, v in os.environ.items() if k != "ELOND_PURE_PYTHON"}
    out = subprocess.run([sys.executable, "-c", "import elond.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"


def test_bench_runs():
    from elond import bench

    rows = bench.run(T=50, N=20, repeat=1)
    assert all(same for _, _, same in rows)
