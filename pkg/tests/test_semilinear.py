import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from speclap import (BoundaryMeasure, Bump, GreenOperator, boundary_graded_grid, build_domain,
                     constant_boundary, kato_check, nonlinearity, power, project,
                     solve_semilinear)
from speclap.errors import InvalidArgumentError, InvalidNonlinearityError, NonConvergenceError
from speclap.semilinear import (Nonlinearity, identity, linear, smoothed_positive_part, square,
                                weighted_l1, zero)

from conftest import PI, evaluator

DOM = build_domain()
GRID = boundary_graded_grid(DOM, 64)
OP = GreenOperator(evaluator(0.5), GRID)
ONE = constant_boundary(DOM)
MID = np.array([[PI / 2]])


def solve(g=None, zeta=ONE, **kw):
    return solve_semilinear(0.5, linear() if g is None else g, zeta, GRID, operator=OP, **kw)


@pytest.fixture(scope="module")
def pair():
    kw = dict(tol=1e-12, keep_iterates=True)
    return solve(start="super", **kw), solve(start="sub", **kw)


@pytest.fixture(scope="module")
def bare_pair():
    kw = dict(tol=1e-12, keep_iterates=True, layer=False)
    return solve(start="super", **kw), solve(start="sub", **kw)


class TestRegistry:
    def test_names(self):
        assert nonlinearity("zero").exponent == 0
        assert nonlinearity("linear").name == "linear"
        assert nonlinearity("power(1.5)").exponent == 1.5

    @pytest.mark.parametrize("spec", ["cubic", "power(x)", "power(0.5)"])
    def test_unknown(self, spec):
        with pytest.raises(InvalidNonlinearityError):
            nonlinearity(spec)

    def test_negative_linear(self):
        with pytest.raises(InvalidNonlinearityError):
            linear(-1.0)

    @pytest.mark.parametrize("s, p, ok", [(0.5, 1.9, True), (0.5, 2.0, False),
                                          (0.25, 1.3, True), (0.25, 1.4, False)])
    def test_certificate(self, s, p, ok):
        assert power(p).certificate(s) is ok

    def test_probe_checks(self):
        bad = Nonlinearity("shift", lambda x, t: t + 1.0, lambda x, t: np.ones_like(t))
        with pytest.raises(InvalidNonlinearityError):
            bad.check_probes(np.array([[1.0]]), [0.0, 1.0])
        dec = Nonlinearity("dec", lambda x, t: -t, lambda x, t: -np.ones_like(t))
        with pytest.raises(InvalidNonlinearityError):
            dec.check_probes(np.array([[1.0]]), [0.0, 1.0])


class TestSolve:
    def test_no_absorption(self):
        u = solve(zero())
        assert np.allclose(u.values, evaluator(0.5).h1(GRID.nodes), rtol=1e-12)

    def test_zero_data(self):
        u = solve(zeta=BoundaryMeasure(DOM))
        assert not np.any(u.values)

    def test_linear_oracle(self, pair):
        # (-Delta)^(1/2) u + u = 0 with u/h1 = 1 at both ends, summed in closed form
        v = pair[0](MID)[0]
        assert 0 < v < 2 / PI
        assert v == pytest.approx(2 / PI * (1 - math.log(2)), rel=1e-5)

    def test_uniqueness(self, pair, bare_pair):
        for a, b in (pair, bare_pair):
            assert weighted_l1(a.values - b.values, GRID) <= 1e-7

    def test_monotone_bracketing(self, bare_pair):
        sup, sub = bare_pair
        A, B = np.array(sup.info["iterates"]), np.array(sub.info["iterates"])
        assert np.all(np.diff(A, axis=0) <= 0)
        assert np.all(np.diff(B, axis=0) >= 0)
        x = MID
        lo = [sub.info["iterates"][k] for k in (-2, -1)]
        hi = [sup.info["iterates"][k] for k in (-2, -1)]
        i = int(np.argmin(np.abs(GRID.nodes[:, 0] - x[0, 0])))
        assert lo[0][i] <= lo[1][i] <= hi[1][i] <= hi[0][i]

    def test_layer_violation_is_small(self, pair):
        sup, sub = pair
        P = sup.info["boundary_part"]
        B = np.array(sub.info["iterates"])
        assert np.min(np.diff(B, axis=0) / P) > -1e-2

    @given(st.floats(0.1, 3.0), st.floats(0.1, 3.0))
    def test_comparison(self, a, da):
        lo = solve(zeta=constant_boundary(DOM, a), tol=1e-10)
        hi = solve(zeta=constant_boundary(DOM, a + da), tol=1e-10)
        assert np.all(hi.values >= lo.values - 1e-9 * hi.values)

    def test_power_bracketed(self):
        u = solve(power(1.5), tol=1e-10)
        assert np.all(u.values >= 0)
        assert np.all(u.values <= u.info["boundary_part"])

    def test_certificate_enforced(self):
        with pytest.raises(InvalidNonlinearityError):
            solve(power(2.5))

    def test_negative_datum(self):
        with pytest.raises(InvalidArgumentError):
            solve(zeta=constant_boundary(DOM, -1.0))

    def test_non_convergence(self):
        with pytest.raises(NonConvergenceError) as exc:
            solve(power(1.5), max_iter=1, tol=1e-14)
        assert exc.value.partial is not None

    def test_bad_start(self):
        with pytest.raises(InvalidArgumentError):
            solve(start="middle")


def random_field(seed):
    rng = np.random.default_rng(seed)
    dom = build_domain(truncation=64)
    a = rng.normal(size=6)
    k = np.arange(1, 7)
    return project(dom, lambda x: np.sin(np.outer(x[:, 0], k)) @ a)


class TestKato:
    BUMP = Bump((PI / 2,), 0.8)

    @pytest.mark.parametrize("seed", range(5))
    def test_linear_equality(self, seed):
        assert abs(kato_check(random_field(seed), *identity(), self.BUMP, 0.5)) < 1e-10

    @given(st.integers(0, 10_000), st.sampled_from([0.3, 0.5, 0.7]))
    def test_square(self, seed, s):
        assert kato_check(random_field(seed), *square(), self.BUMP, s) >= -1e-6

    @given(st.integers(0, 10_000))
    def test_smoothed_positive_part(self, seed):
        assert kato_check(random_field(seed), *smoothed_positive_part(10), self.BUMP, 0.5) >= -1e-6

    def test_smoothed_part_values(self):
        phi, dphi = smoothed_positive_part(10)
        assert phi(0.0) == 0.0
        assert phi(5.0) == pytest.approx(5.0 - 1 / 20, abs=1e-3)
        assert np.all(dphi(np.linspace(-3, 3, 13)) >= 0)
