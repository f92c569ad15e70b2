import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from speclap import HeatKernelEvaluator, build_domain
from speclap.errors import InvalidArgumentError

from conftest import PI


def series_kernel(t, x, y, terms=400):
    j = np.arange(1, terms + 1)
    return float(np.sum(2 / PI * np.sin(j * x) * np.sin(j * y) * np.exp(-j * j * t)))


@pytest.fixture(scope="module")
def H():
    return HeatKernelEvaluator(build_domain())


class TestKernel:
    def test_short_time(self, H):
        assert H.kernel(0.01, PI / 2, PI / 2) == pytest.approx(1 / math.sqrt(0.04 * PI), rel=1e-9)

    def test_unit_time(self, H):
        assert H.kernel(1.0, PI / 2, PI / 2) == pytest.approx(
            2 / PI * (math.exp(-1) + math.exp(-9) + math.exp(-25)), rel=1e-9)

    def test_boundary_zero(self, H):
        assert H.kernel(0.3, 0.0, 1.0) == 0.0
        assert H.kernel(0.3, 1.0, PI) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("t", [0.0, -1.0])
    def test_nonpositive_time(self, H, t):
        with pytest.raises(InvalidArgumentError):
            H.kernel(t, 1.0, 1.0)

    @pytest.mark.parametrize("t", [1e-3, 0.05, 0.3, 2.0, 10.0])
    def test_matches_series(self, H, t):
        for x, y in [(0.3, 0.5), (1.0, 2.9), (3.0, 3.1)]:
            assert H.kernel(t, x, y) == pytest.approx(series_kernel(t, x, y), rel=1e-8, abs=1e-14)

    @given(st.floats(1e-3, 5.0), st.floats(0.01, PI - 0.01), st.floats(0.01, PI - 0.01))
    def test_symmetric_and_positive(self, t, x, y):
        H = HeatKernelEvaluator(build_domain())
        a, b = H.kernel(t, x, y), H.kernel(t, y, x)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-300)
        assert a >= 0

    @given(st.floats(0.02, 1.0), st.floats(0.02, 1.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
    def test_chapman_kolmogorov(self, t1, t2, x, y):
        H = HeatKernelEvaluator(build_domain())
        z, w = np.polynomial.legendre.leggauss(160)
        z = (z + 1) * PI / 2
        w = w * PI / 2
        lhs = np.dot(w, H.kernel(t1, np.full(len(z), x), z) * H.kernel(t2, z, np.full(len(z), y)))
        assert lhs == pytest.approx(H.kernel(t1 + t2, x, y), rel=1e-8, abs=1e-12)


class TestSurvival:
    def test_unit_time(self, H):
        expect = 4 / PI * (math.exp(-1) - math.exp(-9) / 3 + math.exp(-25) / 5)
        assert H.survival(1.0, PI / 2) == pytest.approx(expect, rel=1e-9)

    def test_small_time(self, H):
        assert H.survival(1e-6, PI / 2) == pytest.approx(1.0, abs=1e-12)

    @given(st.floats(0.0, PI))
    def test_subprobability(self, x):
        H = HeatKernelEvaluator(build_domain())
        v = H.survival(np.geomspace(1e-6, 10, 30), np.full(30, x))
        assert np.all(v <= 1 + 1e-12) and np.all(v >= 0)
        assert np.all(np.diff(v) <= 1e-14)


class TestNormalDerivative:
    def test_unit_time(self, H):
        expect = 2 / PI * (math.exp(-1) - 3 * math.exp(-9) + 5 * math.exp(-25))
        assert H.boundary_normal_derivative(1.0, PI / 2, 0.0) == pytest.approx(expect, rel=1e-9)

    def test_reflection(self, H):
        a = H.boundary_normal_derivative(0.2, 1.0, 0.0)
        b = H.boundary_normal_derivative(0.2, PI - 1.0, PI)
        assert a == pytest.approx(b, rel=1e-12)

    def test_interior_point_rejected(self, H):
        with pytest.raises(InvalidArgumentError):
            H.boundary_normal_derivative(1.0, 1.0, 0.5)

    def test_decay(self, H):
        v = H.boundary_normal_derivative(np.linspace(2, 12, 11), np.full(11, PI / 2),
                                         np.zeros(11))
        assert np.all(np.diff(v) < 0)
        assert v[-1] / v[-2] == pytest.approx(math.exp(-1), rel=1e-6)


class TestPropagate:
    def test_decay(self, H):
        c = np.ones(len(H.domain.eigenvalues))
        out = H.propagate(c, 0.5)
        assert out[1] == pytest.approx(math.exp(-2.0))


def test_rectangle_factorizes():
    H2 = HeatKernelEvaluator(build_domain("rectangle"))
    H1 = HeatKernelEvaluator(build_domain())
    x, y = np.array([0.4, 1.7]), np.array([1.1, 2.2])
    assert H2.kernel(0.3, x, y) == pytest.approx(
        H1.kernel(0.3, 0.4, 1.1) * H1.kernel(0.3, 1.7, 2.2), rel=1e-12)
