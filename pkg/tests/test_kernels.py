import os
import subprocess
import sys

import numpy as np
import pytest

from lcx import _kernels
from lcx.core.series import algebra

SHAPES = [(1, 0), (1, 1), (1, 7), (2, 4), (3, 3)]

needs_numba = pytest.mark.skipif(_kernels.NUMBA_KERNELS is None, reason="numba not installed")


def _series(alg, npts, rng, positive=False):
    a = rng.normal(size=(alg.size, npts)) * 0.3
    a[0] = rng.uniform(0.5, 1.5, size=npts) if positive else rng.uniform(-0.7, 0.7, size=npts)
    return a


@needs_numba
@pytest.mark.parametrize("nvars,order", SHAPES)
def test_numba_matches_numpy(nvars, order):
    rng = np.random.default_rng(nvars * 10 + order)
    alg = algebra(nvars, order)
    a = _series(alg, 17, rng)
    b = _series(alg, 17, rng, positive=True)
    npk, nbk = _kernels.NUMPY_KERNELS, _kernels.NUMBA_KERNELS
    pairs = [
        (npk.mul(a, b, alg.ptr, alg.left, alg.right), nbk.mul(a, b, alg.ptr, alg.left, alg.right)),
        (npk.div(a, b, alg.ptr, alg.left, alg.right), nbk.div(a, b, alg.ptr, alg.left, alg.right)),
        (npk.exp(a, alg.ptr, alg.left, alg.right, alg.deg), nbk.exp(a, alg.ptr, alg.left, alg.right, alg.deg)),
        (npk.tan(a, alg.ptr, alg.left, alg.right, alg.deg), nbk.tan(a, alg.ptr, alg.left, alg.right, alg.deg)),
        (npk.atan(a, alg.ptr, alg.left, alg.right, alg.deg), nbk.atan(a, alg.ptr, alg.left, alg.right, alg.deg)),
    ]
    for ref, got in pairs:
        assert np.allclose(got, ref, rtol=1e-13, atol=1e-13 * max(1.0, np.max(np.abs(ref))))


def test_numpy_mul_is_truncated_product():
    alg = algebra(1, 4)
    a = np.array([[1.0], [2.0], [0.0], [0.0], [0.0]])  # 1 + 2t
    b = np.array([[3.0], [1.0], [0.0], [0.0], [0.0]])  # 3 + t
    got = _kernels.NUMPY_KERNELS.mul(a, b, alg.ptr, alg.left, alg.right)[:, 0]
    assert list(got) == [3.0, 7.0, 2.0, 0.0, 0.0]


def test_numpy_exp_series():
    alg = algebra(1, 5)
    a = np.zeros((alg.size, 1))
    a[1, 0] = 1.0  # exp(t)
    got = _kernels.NUMPY_KERNELS.exp(a, alg.ptr, alg.left, alg.right, alg.deg)[:, 0]
    assert np.allclose(got, [1, 1, 1 / 2, 1 / 6, 1 / 24, 1 / 120], rtol=1e-15)


def _selected(env_value):
    env = dict(os.environ, LCX_NUMBA=env_value)
    out = subprocess.run([sys.executable, "-c", "from lcx import _kernels; print(_kernels.KERNELS.name)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_flag_selects_numpy():
    assert _selected("0") == "numpy"


@needs_numba
def test_default_selects_numba():
    assert _selected("1") == "numba"


def test_engine_results_independent_of_kernels(monkeypatch):
    from lcx.core import jets_1d, plateau, tan_stretch, compose

    f = compose(tan_stretch(), plateau(0.2, 0.6))
    xs = np.linspace(-0.7, 0.7, 31)
    ref = jets_1d(f, xs, 6)
    monkeypatch.setattr(_kernels, "KERNELS", _kernels.NUMPY_KERNELS)
    got = jets_1d(f, xs, 6)
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-12 * np.max(np.abs(ref)))
