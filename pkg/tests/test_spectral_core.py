import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from speclap import (Bump, InteriorMeasure, SpectralField, apply_pointwise, apply_semigroup,
                     apply_spectral, build_domain, inverse_apply, project)
from speclap.errors import (InvalidConfigurationError, InvalidMeasureError,
                            NearBoundaryEvaluationError, NumericInputError)

from conftest import PI, evaluator, green_half, kappa_half


def mode(dom, j):
    c = np.zeros(len(dom.eigenvalues))
    c[j - 1] = 1.0
    return SpectralField(dom, c)


def phi(j):
    return lambda x: math.sqrt(2 / PI) * np.sin(j * np.asarray(x)[:, 0])


class TestDomain:
    def test_interval_eigenvalues(self):
        lam = build_domain(truncation=64).eigenvalues
        assert lam[0] == 1.0 and lam[1] == 4.0

    def test_rectangle_smallest_eigenvalue(self):
        assert build_domain("rectangle", truncation=(32, 32)).eigenvalues.min() == 2.0

    @pytest.mark.parametrize("kw", [{"truncation": 0}, {"lengths": (-1.0,)},
                                    {"lengths": (0.0,)}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidConfigurationError):
            build_domain(**kw)

    def test_unknown_kind(self):
        with pytest.raises(InvalidConfigurationError):
            build_domain("disk")

    def test_eigenfunctions_orthonormal(self, interval):
        x, w = np.polynomial.legendre.leggauss(200)
        x = (x + 1) * PI / 2
        E = build_domain(truncation=20).eigenfunctions(x.reshape(-1, 1))
        G = E.T @ (E * (w * PI / 2)[:, None])
        assert np.allclose(G, np.eye(20), atol=1e-12)


class TestProject:
    def test_single_mode(self, interval):
        c = project(interval, phi(3)).coefficients
        assert c[2] == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(np.delete(c, 2))) < 1e-12

    def test_constant(self):
        dom = build_domain(truncation=64)
        c = project(dom, lambda x: np.ones(len(x))).coefficients
        j = np.arange(1, 65)
        expect = np.where(j % 2 == 1, math.sqrt(2 / PI) * 2 / j, 0.0)
        assert np.allclose(c, expect, atol=1e-12)

    def test_two_sines(self, interval):
        c = project(interval, lambda x: np.sin(x[:, 0]) + np.sin(2 * x[:, 0])).coefficients
        assert c[:2] == pytest.approx([math.sqrt(PI / 2)] * 2, abs=1e-12)

    def test_non_finite(self, interval):
        with pytest.raises(NumericInputError):
            project(interval, lambda x: np.where(x[:, 0] > 1.0, np.nan, 1.0))

    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_linear(self, a, b):
        dom = build_domain(truncation=32)
        f = lambda x: np.cos(x[:, 0])  # noqa: E731
        g = lambda x: x[:, 0] ** 2  # noqa: E731
        lhs = project(dom, lambda x: a * f(x) + b * g(x)).coefficients
        rhs = a * project(dom, f).coefficients + b * project(dom, g).coefficients
        assert np.allclose(lhs, rhs, atol=1e-10)


class TestApplySpectral:
    def test_first_mode(self, interval):
        out = apply_spectral(mode(interval, 1), 0.5)
        assert np.allclose(out.coefficients, mode(interval, 1).coefficients)

    def test_second_mode(self, interval):
        assert apply_spectral(mode(interval, 2), 0.5).coefficients[1] == pytest.approx(2.0)

    def test_zero(self, interval):
        z = SpectralField(interval, np.zeros(len(interval.eigenvalues)))
        assert not np.any(apply_spectral(z, 0.5).coefficients)

    @pytest.mark.parametrize("s", [0.0, -0.2, 1.2, float("nan")])
    def test_bad_order(self, interval, s):
        with pytest.raises(InvalidConfigurationError):
            apply_spectral(mode(interval, 1), s)

    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    def test_semigroup_property(self, a, b):
        dom = build_domain(truncation=16)
        u = SpectralField(dom, 1.0 / np.arange(1, 17) ** 2)
        lhs = apply_spectral(apply_spectral(u, a / 2), b / 2)
        rhs = apply_spectral(u, (a + b) / 2)
        assert np.allclose(lhs.coefficients, rhs.coefficients, rtol=1e-12)


class TestInverse:
    def test_first_mode(self, interval):
        assert inverse_apply(mode(interval, 1), 0.5).coefficients[0] == pytest.approx(1.0)

    def test_third_mode(self, interval):
        assert inverse_apply(mode(interval, 3), 0.5).coefficients[2] == pytest.approx(1 / 3)

    def test_atom_matches_green(self):
        dom = build_domain(truncation=4096)
        u = inverse_apply(InteriorMeasure(dom, (((PI / 2,), 1.0),)), 0.5)
        assert u(np.array([[PI / 3]]))[0] == pytest.approx(float(green_half(PI / 3, PI / 2)),
                                                           rel=1e-3)

    def test_boundary_atom_rejected(self, interval):
        with pytest.raises(InvalidMeasureError):
            InteriorMeasure(interval, (((0.0,), 1.0),))

    @given(st.floats(0.1, 0.9))
    def test_inverse_of_apply(self, s):
        dom = build_domain(truncation=16)
        u = SpectralField(dom, np.cos(np.arange(16.0)))
        back = inverse_apply(apply_spectral(u, s), s)
        assert np.allclose(back.coefficients, u.coefficients, rtol=1e-12)


class TestPointwise:
    def test_first_mode(self, interval):
        v = apply_pointwise(phi(1), 0.5, np.array([[PI / 2]]), evaluator=evaluator(0.5))
        assert v[0] == pytest.approx(math.sqrt(2 / PI), rel=1e-4)
        assert v[0] == pytest.approx(apply_spectral(mode(interval, 1), 0.5)(
            np.array([[PI / 2]]))[0], rel=1e-4)

    def test_constant_gives_killing_measure(self):
        v = apply_pointwise(lambda x: np.ones(len(x)), 0.5, np.array([[PI / 2]]),
                            evaluator=evaluator(0.5))
        assert v[0] == pytest.approx(2 / PI, rel=1e-4)

    def test_zero(self):
        v = apply_pointwise(lambda x: np.zeros(len(x)), 0.5, np.array([[1.0]]),
                            evaluator=evaluator(0.5))
        assert v[0] == 0.0

    def test_boundary_rejected(self):
        with pytest.raises(NearBoundaryEvaluationError):
            apply_pointwise(phi(1), 0.5, np.array([[0.0]]), evaluator=evaluator(0.5))


class TestSemigroup:
    def test_first_mode(self, interval):
        v = apply_semigroup(mode(interval, 1), 0.5, np.array([[PI / 2]]))
        assert v[0] == pytest.approx(math.sqrt(2 / PI), rel=1e-6)

    def test_second_mode(self, interval):
        v = apply_semigroup(mode(interval, 2), 0.5, np.array([[PI / 4]]))
        assert v[0] == pytest.approx(2 * math.sqrt(2 / PI), rel=1e-6)

    def test_zero(self, interval):
        z = SpectralField(interval, np.zeros(len(interval.eigenvalues)))
        assert apply_semigroup(z, 0.5, np.array([[1.0]]))[0] == 0.0

    def test_constant(self, interval):
        x = np.array([[PI / 4], [PI / 2]])
        v = apply_semigroup(1.0, 0.5, x, evaluator=evaluator(0.5))
        assert np.allclose(v, kappa_half(x[:, 0]), rtol=1e-4)


class TestBump:
    def test_support(self):
        b = Bump((1.0,), 0.5)
        assert b(np.array([[1.0], [1.5], [2.0]])).tolist() == [1.0, 0.0, 0.0]

    def test_must_fit(self, interval):
        from speclap.errors import InvalidArgumentError
        with pytest.raises(InvalidArgumentError):
            Bump((0.2,), 0.5).project(interval)
