"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed together at the end of the run.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from speclap import (GreenOperator, InteriorMeasure, KernelEvaluator, LargeRunConfig,
                     boundary_graded_grid, boundary_trace, build_domain, build_supersolution,
                     bump_family, constant_boundary, fit_boundary_rate, kato_check,
                     lp_threshold_scan, project, solve_large, solve_linear, solve_semilinear,
                     weak_residual)
from speclap.conformance import (verify_composition, verify_max_principles,
                                 verify_operator_agreement)
from speclap.dirichlet import BoundaryMeasure, data_scale
from speclap.large import LargeProblem
from speclap.semilinear import linear, smoothed_positive_part, square, weighted_l1

from conftest import PI, green_half, kappa_half, poisson_half, record

DOM = build_domain()
SEED = 20170901


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.abs(b)))


def test_01_green_oracle():
    rng = np.random.default_rng(SEED)
    pairs = []
    while len(pairs) < 200:
        x, y = rng.uniform(0.01, PI - 0.01, 2)
        if abs(x - y) >= 0.05:
            pairs.append((x, y))
    x, y = np.array(pairs).T
    K = KernelEvaluator(DOM, 0.5)
    err = rel_err(K.green(x.reshape(-1, 1), y.reshape(-1, 1)), green_half(x, y))
    assert record(1, "Green oracle, s=1/2, 200 pairs", err <= 1e-6,
                  f"max rel err {err:.2e} (tol 1e-6)")


def test_02_poisson_oracle():
    d = np.geomspace(1e-3, PI / 2, 50)
    x = np.concatenate([d, PI - d])
    K = KernelEvaluator(DOM, 0.5)
    err = rel_err(K.poisson(x.reshape(-1, 1), np.zeros((100, 1))), poisson_half(x))
    assert record(2, "Poisson oracle, s=1/2, 100 probes", err <= 1e-4,
                  f"max rel err {err:.2e} (tol 1e-4)")


def test_03_composition():
    parts, ok = [], True
    for s in (0.25, 0.5, 0.75):
        t = time.perf_counter()
        row = verify_composition(s, seed=SEED, count=50)[0]
        dt = time.perf_counter() - t
        ok &= row.max_violation <= 1e-3 and dt <= 60 and row.probes == 50
        parts.append(f"s={s}: {row.max_violation:.1e} in {dt:.1f}s")
    assert record(3, "composition identity, 50 pairs", ok, "; ".join(parts) + " (tol 1e-3, 60 s)")


def test_04_operator_agreement():
    parts, ok = [], True
    for s in (0.3, 0.5, 0.7):
        rows = {r.check: r for r in verify_operator_agreement(s)}
        v = rows["operator-agreement"].max_violation
        ok &= v <= 1e-3
        parts.append(f"s={s}: {v:.1e}")
    assert record(4, "three operator realizations, 5 bumps", ok,
                  "spread " + ", ".join(parts) + " (tol 1e-3)")


def test_05_killing_oracle():
    d = np.geomspace(1e-2, PI / 2, 25)
    x = np.concatenate([d, PI - d])
    K = KernelEvaluator(DOM, 0.5)
    err = rel_err(K.killing_measure(x.reshape(-1, 1)), kappa_half(x))
    assert record(5, "killing measure oracle, 50 probes", err <= 1e-3,
                  f"max rel err {err:.2e} (tol 1e-3)")


def test_06_h1_rate():
    d = np.geomspace(1e-3, 1e-1, 40)
    parts, ok = [], True
    for s in (0.25, 0.5, 0.75):
        K = KernelEvaluator(DOM, s)
        fit = fit_boundary_rate(K.h1(d.reshape(-1, 1)), d, (1e-3, 1e-1), diam=PI)
        ok &= abs(fit.exponent + (2 - 2 * s)) <= 0.05 and fit.r2 >= 0.999
        parts.append(f"s={s}: {fit.exponent:.4f} (R2 {fit.r2:.6f})")
    assert record(6, "h1 boundary rate", ok, "; ".join(parts) + " (target -(2-2s) +- 0.05)")


def test_07_linear_solver():
    s = 0.5
    K = KernelEvaluator(DOM, s)
    grid = boundary_graded_grid(DOM, 64)
    op = GreenOperator(K, grid)
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(5):
        atoms = tuple(((float(y),), float(w)) for y, w in
                      zip(rng.uniform(0.05, PI - 0.05, 3), rng.uniform(-1, 2, 3)))
        a, k = rng.uniform(0.2, 2.0), int(rng.integers(1, 4))
        mu = InteriorMeasure(DOM, atoms, lambda p, a=a, k=k: a * np.sin(k * p[:, 0]) ** 2)
        zeta = BoundaryMeasure(DOM, (((0.0,), float(rng.uniform(0, 2))),
                                     ((PI,), float(rng.uniform(0, 2)))))
        u = solve_linear(s, mu, zeta, grid, K, op)
        scale = data_scale(mu, zeta, grid)
        for b in bump_family(DOM):
            worst = max(worst, abs(weak_residual(u, mu, zeta, b, s)) / scale)
    mp = {r.check: r for r in verify_max_principles(s, trials=50, seed=SEED)}
    viol = max(mp["max-principle"].max_violation, mp["max-principle-boundary"].max_violation)
    ok = worst <= 1e-3 and viol <= 1e-10
    assert record(7, "linear solver", ok,
                  f"weak residual / data scale {worst:.1e} (tol 1e-3); "
                  f"max-principle violation {viol:.1e} over 50+50 trials (tol 1e-10)")


def test_08_weighted_traces():
    s = 0.5
    K = KernelEvaluator(DOM, s)
    grid = boundary_graded_grid(DOM, 64)
    h = solve_linear(s, None, constant_boundary(DOM), grid, K)
    g = solve_linear(s, InteriorMeasure(DOM, (((PI / 2,), 1.0),)), None, grid, K)
    th = boundary_trace(h, s, evaluator=K).limit
    tg = boundary_trace(g, s, evaluator=K).limit
    ok = abs(th - 2) <= 0.01 and abs(tg) <= 0.01
    assert record(8, "weighted boundary traces", ok,
                  f"density 1 -> {th:.6f} (2 +- 0.01); atom -> {tg:.1e} (<= 0.01)")


def test_09_lp_threshold():
    K = KernelEvaluator(DOM, 0.5)
    lo = lp_threshold_scan(0.5, 1.5, evaluator=K)
    hi = lp_threshold_scan(0.5, 2.5, evaluator=K)
    ok = lo.stabilizes and not lo.grows and hi.grows and not hi.stabilizes \
        and bool(np.all(np.diff(hi.values) > 0))
    assert record(9, "L^p threshold, N=1, s=1/2", ok,
                  f"p=1.5 values {lo.values[0]:.3f}..{lo.values[-1]:.3f} stable={lo.stabilizes}; "
                  f"p=2.5 values {hi.values[0]:.1f}..{hi.values[-1]:.1f} grows={hi.grows}")


def test_10_semilinear_uniqueness():
    s = 0.5
    grid = boundary_graded_grid(DOM, 64)
    op = GreenOperator(KernelEvaluator(DOM, s), grid)
    one = constant_boundary(DOM)
    gap, mono = 0.0, 0.0
    for layer in (True, False):
        kw = dict(tol=1e-12, operator=op, keep_iterates=True, layer=layer)
        sup = solve_semilinear(s, linear(), one, grid, start="super", **kw)
        sub = solve_semilinear(s, linear(), one, grid, start="sub", **kw)
        gap = max(gap, weighted_l1(sup.values - sub.values, grid))
        if not layer:
            # the monotone scheme itself; the layer correction is a quadrature refinement
            A, B = np.array(sup.info["iterates"]), np.array(sub.info["iterates"])
            mono = max(float(np.diff(A, axis=0).max()), float(-np.diff(B, axis=0).min()),
                       float((B[-1] - A[-1]).max()))
    ok = gap <= 1e-7 and mono <= 0
    assert record(10, "semilinear uniqueness, g(t)=t", ok,
                  f"sub/super weighted L1 gap {gap:.1e} (tol 1e-7); "
                  f"largest step against the bracket {mono:.1e} (tol 0)")


def test_11_kato():
    dom = build_domain(truncation=64)
    rng = np.random.default_rng(SEED)
    k = np.arange(1, 7)
    bump = bump_family(DOM)[0]
    worst = math.inf
    for _ in range(20):
        a = rng.normal(size=6) / k
        f = project(dom, lambda x, a=a: np.sin(np.outer(x[:, 0], k)) @ a)
        for Phi in (square(), smoothed_positive_part(10)):
            worst = min(worst, kato_check(f, *Phi, bump, 0.5))
    assert record(11, "Kato slack, 20 random f", worst >= -1e-6,
                  f"smallest slack {worst:.2e} (tol -1e-6)")


EXTENDED = (1, 2, 4, 8, 16, 32, 64, 256, 1024, 4096, 16384, 65536)
LARGE_CASES = {(0.5, 1.75): {}, (0.6, 1.8): {"schedule": EXTENDED}}


@pytest.fixture(scope="module")
def large_runs():
    out = {}
    for (s, p), kw in LARGE_CASES.items():
        cfg = LargeRunConfig(s, p, **kw)
        t = time.perf_counter()
        problem = LargeProblem(cfg)
        sup = build_supersolution(cfg, problem)
        res = solve_large(cfg, problem, sup)
        out[(s, p)] = (cfg, sup, res, time.perf_counter() - t)
    return out


def test_12_large_solutions(large_runs):
    cfg, _, r, dt = large_runs[(0.5, 1.75)]
    ok_a = (r.monotone_violation <= 0 and r.domination_violation <= 0
            and r.stagnant_at is not None and r.stagnant_at <= 64
            and abs(r.fit.exponent + 4 / 3) <= 0.1 and dt <= 600)
    cfg_b, _, rb, dtb = large_runs[(0.6, 1.8)]
    ok_b = abs(rb.fit.exponent + 1.5) <= 0.1 and dtb <= 600
    assert record(12, "large solutions", ok_a and ok_b,
                  f"(0.5,1.75): exponent {r.fit.exponent:.4f}, stagnant at j={r.stagnant_at}, "
                  f"monotone {r.monotone_violation:.1e}, dominated {r.domination_violation:.1e}, "
                  f"{dt:.0f}s; (0.6,1.8): exponent {rb.fit.exponent:.4f}, {dtb:.0f}s")


def test_13_supersolution_certificate(large_runs):
    worst = {k: v[1].worst for k, v in large_runs.items()}
    ok = all(w >= -1e-6 for w in worst.values())
    assert record(13, "supersolution certificate", ok,
                  "; ".join(f"{k}: min margin/scale {w:.2e}" for k, w in worst.items())
                  + " (tol -1e-6)")


def test_14_reproducible_verify(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        subprocess.run([sys.executable, "-m", "speclap", "verify", "--s", "0.5", "--seed",
                        str(SEED), "--output", str(path)], check=True, env=dict(os.environ))
        outs.append(path.read_bytes())
    same = outs[0] == outs[1]
    assert record(14, "reproducible verify CSV", same and len(outs[0]) > 0,
                  f"{len(outs[0])} bytes, identical={same}")
