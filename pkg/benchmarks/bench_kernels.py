"""Compiled vs pure-Python heat-kernel time integrals.

Times the backend call behind ``G^s``, ``P^s``, ``J`` and ``kappa`` on the
same random pairs with both implementations, and a full Green-matrix
assembly on a boundary-graded grid with each backend forced in turn.

    python benchmarks/bench_kernels.py [--pairs 4000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import importlib
import math
import os
import subprocess
import sys
import time

import numpy as np

from speclap._backend import MODE_KERNEL, MODE_KILL, MODE_NORMAL, _images_py

try:
    from speclap._backend import _images
except ImportError:  # extension not built
    _images = None


def _args(n, mode, seed=7):
    # close pairs and near-boundary points: the regime of Nystrom assembly,
    # where the log-time panels are all active
    rng = np.random.default_rng(seed)
    L = math.pi
    d = 10.0 ** rng.uniform(-8, -1, n)
    x = np.where(rng.random(n) < 0.5, d, L - d).reshape(-1, 1)
    if mode == MODE_NORMAL:
        y = np.zeros((n, 1))
        face = np.zeros(n, dtype=np.int64)
        t0 = x[:, 0] ** 2
    elif mode == MODE_KILL:
        y = x.copy()
        face = np.zeros(n, dtype=np.int64)
        t0 = np.minimum(x[:, 0], L - x[:, 0]) ** 2
    else:
        y = np.clip(x + 10.0 ** rng.uniform(-6, -1, (n, 1)) * rng.choice([-1, 1], (n, 1)),
                    1e-9, L - 1e-9)
        face = np.zeros(n, dtype=np.int64)
        t0 = (x[:, 0] - y[:, 0]) ** 2
    nt, nw = np.polynomial.legendre.leggauss(64)
    ft, fw = np.polynomial.legendre.leggauss(16)
    return (x, y, face, t0, (L,), mode, -0.5, L * L / (2 * math.pi ** 2),
            0.5 * (nt + 1), 0.5 * nw, 0.5 * (ft + 1), 0.5 * fw, 2.5, 3, 8)


def _best(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def bench_backend(pairs, repeat):
    rows = []
    for name, mode in (("kernel", MODE_KERNEL), ("normal", MODE_NORMAL), ("killed", MODE_KILL)):
        a = _args(pairs, mode)
        tp, vp = _best(lambda: _images_py.time_integral(*a), repeat)
        if _images is None:
            rows.append((name, tp, math.nan, math.nan))
            continue
        tc, vc = _best(lambda: _images.time_integral(*a), repeat)
        diff = float(np.max(np.abs(vc - vp) / np.maximum(np.abs(vp), 1e-300)))
        rows.append((name, tp, tc, diff))
    return rows


_ASSEMBLY = """
import time, speclap
from speclap import build_domain, KernelEvaluator, boundary_graded_grid, GreenOperator
dom = build_domain()
K = KernelEvaluator(dom, 0.5)
g = boundary_graded_grid(dom, {n})
t = time.perf_counter(); GreenOperator(K, g).matrix; dt = time.perf_counter() - t
print(speclap.BACKEND, dt)
"""


def bench_assembly(n):
    out = {}
    for pure in ("0", "1"):
        env = dict(os.environ, SPECLAP_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", _ASSEMBLY.format(n=n)], env=env,
                             capture_output=True, text=True, check=True)
        name, dt = res.stdout.split()
        out[name] = float(dt)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--grid", type=int, default=64)
    args = ap.parse_args(argv)
    importlib.import_module("speclap")
    print(f"time integrals, {args.pairs} pairs (best of {args.repeat})")
    print(f"{'mode':8s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, tp, tc, diff in bench_backend(args.pairs, args.repeat):
        print(f"{name:8s} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f} {diff:13.2e}")
    res = bench_assembly(args.grid)
    print(f"\nGreen operator assembly, n = {args.grid}")
    for name in sorted(res):
        print(f"{name:8s} {res[name]:10.3f} s")


if __name__ == "__main__":
    main()
