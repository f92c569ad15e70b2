import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from speclap import (BoundaryMeasure, GreenOperator, InteriorMeasure, boundary_graded_grid,
                     boundary_trace, build_domain, bump_family, constant_boundary,
                     lp_threshold_scan, parse_measure_file, project, solve_linear,
                     weak_residual)
from speclap.dirichlet import data_scale
from speclap.errors import InvalidArgumentError, InvalidMeasureError, ResolutionError
from speclap.numerics import GridFunction

from conftest import PI, evaluator, green_half, poisson_half

DOM = build_domain()
GRID = boundary_graded_grid(DOM, 64)
OPS = {}


def operator(s):
    if s not in OPS:
        OPS[s] = GreenOperator(evaluator(s), GRID)
    return OPS[s]


def atom(y, w=1.0):
    return InteriorMeasure(DOM, (((y,), w),))


def solve(s, mu=None, zeta=None):
    return solve_linear(s, mu, zeta, GRID, evaluator(s), operator(s) if mu is not None
                        and mu.density is not None else None)


class TestMeasures:
    def test_interior_atom_on_boundary(self):
        with pytest.raises(InvalidMeasureError):
            atom(PI)

    def test_boundary_atom_inside(self):
        with pytest.raises(InvalidMeasureError):
            BoundaryMeasure(DOM, (((1.0,), 1.0),))

    def test_non_finite_atom(self):
        with pytest.raises(InvalidMeasureError):
            atom(1.0, float("nan"))

    def test_total_variation(self):
        assert constant_boundary(DOM, 2.0).total_variation() == pytest.approx(4.0)
        z = BoundaryMeasure(DOM, (((0.0,), -1.5),))
        assert z.total_variation() == pytest.approx(1.5)

    def test_parse(self):
        text = "# data\n[interior]\natom 1.0 0.5\ndensity sine 2\n[boundary]\natom 0 1\n"
        mu, zeta = parse_measure_file(text, DOM)
        assert mu.atoms == (((1.0,), 0.5),)
        assert mu.density(np.array([[PI / 2]]))[0] == pytest.approx(2.0)
        assert zeta.atoms == (((0.0,), 1.0),)

    def test_parse_errors_all_reported(self):
        text = "atom 1 1\n[interior]\natom 0 1\natom 1\n[nowhere]\n"
        with pytest.raises(InvalidMeasureError) as exc:
            parse_measure_file(text, DOM, "m.txt")
        msg = str(exc.value)
        assert "m.txt:1:" in msg and "m.txt:3:" in msg and "m.txt:4:" in msg
        assert "m.txt:5:" in msg


class TestSolveLinear:
    def test_h1(self):
        u = solve(0.5, zeta=constant_boundary(DOM))
        assert np.allclose(u.values, evaluator(0.5).h1(GRID.nodes), rtol=1e-12)

    def test_green_oracle(self):
        u = solve(0.5, atom(PI / 2))
        assert u(np.array([[PI / 3]]))[0] == pytest.approx(float(green_half(PI / 3, PI / 2)),
                                                           rel=1e-9)

    def test_zero_data(self):
        u = solve(0.5)
        assert not np.any(u.values)

    def test_atom_on_node_flagged(self):
        y = float(GRID.nodes[20, 0])
        u = solve(0.5, atom(y))
        assert np.isnan(u.values[20])
        assert math.isfinite(u.info["l1_delta"])

    def test_order_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            solve_linear(0.3, None, constant_boundary(DOM), GRID, evaluator(0.5))

    @given(st.lists(st.tuples(st.floats(0.05, PI - 0.05), st.floats(-2, 2)), min_size=1,
                    max_size=4),
           st.floats(-2, 2), st.floats(-2, 2))
    def test_linearity(self, atoms, a, b):
        mu = InteriorMeasure(DOM, tuple(((y,), w) for y, w in atoms))
        zeta = BoundaryMeasure(DOM, (((0.0,), a), ((PI,), b)))
        u = solve(0.5, mu, zeta)
        v = solve(0.5, mu) + solve(0.5, zeta=zeta)
        x = np.array([[0.7], [2.2]])
        assert np.allclose(u(x), v(x), rtol=1e-10, atol=1e-12, equal_nan=True)

    @given(st.lists(st.tuples(st.floats(0.01, PI - 0.01), st.floats(0, 3)), min_size=1,
                    max_size=5),
           st.floats(0, 3), st.sampled_from([0.3, 0.5, 0.8]))
    def test_maximum_principle(self, atoms, b, s):
        mu = InteriorMeasure(DOM, tuple(((y,), w) for y, w in atoms))
        u = solve(s, mu, BoundaryMeasure(DOM, (((PI,), b),)))
        assert np.nanmin(u.values) >= -1e-10

    @given(st.floats(0.1, PI - 0.1), st.floats(0.1, 2), st.floats(0.1, 2))
    def test_comparison(self, y, w1, dw):
        x = np.linspace(0.05, PI - 0.05, 23).reshape(-1, 1)
        lo = solve(0.5, atom(y, w1))(x)
        hi = solve(0.5, atom(y, w1 + dw))(x)
        assert np.all(hi >= lo - 1e-12)

    def test_sign_inversion(self):
        assert np.nanmax(solve(0.5, atom(1.0, -1.0)).values) < 0

    def test_continuous_boundary_data(self):
        ramp = lambda z: 1.0 + z[:, 0] / (1.0 + np.abs(z[:, 0]))  # noqa: E731
        u = solve(0.5, zeta=BoundaryMeasure(DOM, (), ramp))
        K = evaluator(0.5)
        errs = []
        for w in (1e-1, 1e-2, 1e-3):
            d = np.geomspace(1e-4 * w, w, 6)
            x = np.concatenate([d, PI - d]).reshape(-1, 1)
            z = np.where(x[:, 0] < PI / 2, 0.0, PI).reshape(-1, 1)
            errs.append(np.max(np.abs(u(x) / K.h1(x) - ramp(z))))
        assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-2


class TestWeakResidual:
    @pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
    def test_atoms(self, s):
        mu = InteriorMeasure(DOM, (((0.8,), 1.2), ((2.0,), 0.4)))
        zeta = BoundaryMeasure(DOM, (((0.0,), 0.3),))
        u = solve(s, mu, zeta)
        scale = data_scale(mu, zeta)
        for b in bump_family(DOM):
            assert abs(weak_residual(u, mu, zeta, b, s)) <= 1e-3 * scale

    def test_density(self):
        mu = InteriorMeasure(DOM, (), lambda p: np.sin(p[:, 0]) ** 2)
        zeta = constant_boundary(DOM, 0.5)
        u = solve(0.5, mu, zeta)
        scale = data_scale(mu, zeta, GRID)
        for b in bump_family(DOM):
            assert abs(weak_residual(u, mu, zeta, b, 0.5)) <= 1e-3 * scale

    def test_superposition(self):
        mu = atom(PI / 2, 0.1)
        zeta = constant_boundary(DOM)
        u = solve(0.5, zeta=zeta) + solve(0.5, mu)
        for b in bump_family(DOM):
            assert abs(weak_residual(u, mu, zeta, b, 0.5)) <= 1e-6

    def test_perturbation_detected(self):
        zeta = constant_boundary(DOM)
        h = solve(0.5, zeta=zeta)
        phi1 = lambda x: math.sqrt(2 / PI) * np.sin(np.asarray(x)[:, 0])  # noqa: E731
        u = GridFunction(GRID, h.values + phi1(GRID.nodes), lambda x: h.exact(x) + phi1(x))
        b = bump_family(DOM)[0]
        expect = project(DOM, b, breakpoints=b.breakpoints()).coefficients[0]
        assert weak_residual(u, None, zeta, b, 0.5) == pytest.approx(expect, rel=1e-6)


class TestTrace:
    def test_h1(self):
        r = boundary_trace(solve(0.5, zeta=constant_boundary(DOM)), 0.5, evaluator=evaluator(0.5))
        assert r.limit == pytest.approx(2.0, abs=1e-9)

    def test_green_potential(self):
        r = boundary_trace(solve(0.5, atom(PI / 2)), 0.5, evaluator=evaluator(0.5))
        assert abs(r.limit) < 1e-6

    def test_poisson(self):
        u = solve(0.5, zeta=BoundaryMeasure(DOM, (((0.0,), 1.0),)))
        assert u(np.array([[0.3]]))[0] == pytest.approx(float(poisson_half(0.3)), rel=1e-9)
        r = boundary_trace(u, 0.5, evaluator=evaluator(0.5))
        assert r.limit == pytest.approx(1.0, abs=1e-6)

    def test_weighted(self):
        zeta = BoundaryMeasure(DOM, (((0.0,), 0.7), ((PI,), 1.9)))
        phi = lambda p: 1.0 + np.cos(p[:, 0] / PI) ** 2  # noqa: E731
        r = boundary_trace(solve(0.5, zeta=zeta), 0.5, weight=phi, evaluator=evaluator(0.5))
        assert r.limit == pytest.approx(0.7 * 2 + 1.9 * (1 + math.cos(1) ** 2), rel=1e-3)

    def test_grid_values_only(self):
        u = GridFunction(GRID, evaluator(0.5).h1(GRID.nodes))
        r = boundary_trace(u, 0.5, evaluator=evaluator(0.5))
        assert r.limit == pytest.approx(2.0, rel=1e-9)

    def test_no_nodes_in_strip(self):
        g = boundary_graded_grid(DOM, 16, delta_min=0.05)
        u = GridFunction(g, np.ones(g.size))
        with pytest.raises(ResolutionError):
            boundary_trace(u, 0.5, evaluator=evaluator(0.5), t=0.3, delta_min=0.01)

    def test_bad_width(self):
        with pytest.raises(InvalidArgumentError):
            boundary_trace(solve(0.5), 0.5, evaluator=evaluator(0.5), t=1.0)


class TestLpScan:
    def test_below_threshold(self):
        r = lp_threshold_scan(0.5, 1.5, evaluator=evaluator(0.5))
        assert r.threshold == pytest.approx(2.0)
        assert r.stabilizes and not r.grows

    def test_above_threshold(self):
        r = lp_threshold_scan(0.5, 2.5, evaluator=evaluator(0.5))
        assert r.grows and not r.stabilizes
        assert np.all(np.diff(r.values) > 0)

    def test_p_one_finite(self):
        r = lp_threshold_scan(0.5, 1.0, evaluator=evaluator(0.5))
        assert r.stabilizes and math.isfinite(r.sup)

    def test_p_below_one(self):
        with pytest.raises(InvalidArgumentError):
            lp_threshold_scan(0.5, 0.5, evaluator=evaluator(0.5))
