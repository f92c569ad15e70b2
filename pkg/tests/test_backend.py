import math
import os
import subprocess
import sys

import numpy as np
import pytest

import speclap
from speclap._backend import MODE_KERNEL, MODE_KILL, MODE_NORMAL, _images_py

try:
    from speclap._backend import _images
except ImportError:  # extension not built
    _images = None

compiled = pytest.mark.skipif(_images is None, reason="compiled extension not built")
L = math.pi


def args(mode, n=300, seed=11):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.05, L - 0.05, (n, 1))
    if mode == MODE_NORMAL:
        y, t0 = np.zeros((n, 1)), x[:, 0] ** 2
    elif mode == MODE_KILL:
        y, t0 = x.copy(), np.minimum(x[:, 0], L - x[:, 0]) ** 2
    else:
        y = rng.uniform(0.05, L - 0.05, (n, 1))
        t0 = (x[:, 0] - y[:, 0]) ** 2
    nt, nw = np.polynomial.legendre.leggauss(64)
    ft, fw = np.polynomial.legendre.leggauss(16)
    face = np.zeros(n, dtype=np.int64)
    return (x, y, face, t0, (L,), mode, -0.5, L * L / (2 * math.pi ** 2),
            0.5 * (nt + 1), 0.5 * nw, 0.5 * (ft + 1), 0.5 * fw, 2.5, 3, 8)


def test_backend_name():
    assert speclap.BACKEND in ("cython", "python")
    if _images is not None and os.environ.get("SPECLAP_PURE_PYTHON", "") not in ("1", "true", "yes"):
        assert speclap.BACKEND == "cython"


@compiled
@pytest.mark.parametrize("mode", [MODE_KERNEL, MODE_NORMAL, MODE_KILL])
def test_time_integral_agrees(mode):
    a = args(mode)
    py = _images_py.time_integral(*a)
    cy = _images.time_integral(*a)
    assert np.allclose(cy, py, rtol=1e-11, atol=1e-300)


@compiled
def test_heat_values_agree():
    rng = np.random.default_rng(5)
    t = 10.0 ** rng.uniform(-4, 0.5, 200)
    x = rng.uniform(0, L, (200, 1))
    y = rng.uniform(0, L, (200, 1))
    assert np.allclose(_images.heat_values(t, x, y, (L,), 8),
                       _images_py.heat_values(t, x, y, (L,), 8), rtol=1e-12, atol=1e-300)


_PROBE = ("import speclap, math; from speclap import KernelEvaluator, build_domain; "
          "K = KernelEvaluator(build_domain(), 0.5); "
          "print(speclap.BACKEND, repr(K.green(math.pi / 3, math.pi / 2)), "
          "repr(K.killing_measure(0.4)))")


def _probe(pure):
    env = dict(os.environ, SPECLAP_PURE_PYTHON=pure)
    out = subprocess.run([sys.executable, "-c", _PROBE], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    return out[0], float(out[1]), float(out[2])


def test_fallback_selected():
    name, g, k = _probe("1")
    assert name == "python"
    assert g == pytest.approx(0.4192007182838683, rel=1e-9)


@compiled
def test_backends_agree_end_to_end():
    py = _probe("1")
    cy = _probe("0")
    assert cy[0] == "cython"
    assert cy[1] == pytest.approx(py[1], rel=1e-12)
    assert cy[2] == pytest.approx(py[2], rel=1e-12)
