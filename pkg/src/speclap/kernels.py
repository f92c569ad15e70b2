"""Green function, Poisson kernel, jumping kernel, killing measure and h1.

Every kernel is a time integral of the heat kernel against a power of ``t``.
The integral over ``(0, t_switch]`` is done numerically with the image form
of the heat kernel (see :class:`~speclap.numerics.TimeQuadrature`); the rest
is done exactly mode by mode with upper incomplete gamma functions.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import exp1, gamma, gammaincc

from . import _backend
from .domain import SpectralDomain
from .errors import (InvalidArgumentError, InvalidConfigurationError,
                     NumericInputError, OnDiagonalError)
from .heat import HeatKernelEvaluator
from .numerics import TimeQuadrature

# Modes with lambda * t_switch above this contribute below 1e-19 to any tail.
_TAIL_CUT = 45.0


def upper_gamma(b: float, z) -> np.ndarray:
    """Upper incomplete gamma ``Gamma(b, z)`` for real ``b > -1`` and ``z > 0``."""
    z = np.asarray(z, dtype=float)
    if b > 0:
        return gammaincc(b, z) * gamma(b)
    if b == 0:
        return exp1(z)
    if b > -1:
        return (upper_gamma(b + 1.0, z) - z ** b * np.exp(-z)) / b
    raise InvalidArgumentError("upper_gamma needs b > -1")


def thread_count() -> int:
    try:
        n = int(os.environ.get("SPECLAP_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def check_order(s, allow_one=True) -> float:
    s = float(s)
    hi_ok = s <= 1.0 if allow_one else s < 1.0
    if not (s > 0.0 and hi_ok):
        rng = "(0, 1]" if allow_one else "(0, 1)"
        raise InvalidConfigurationError(f"s must lie in {rng}, got {s}")
    return s


@dataclass(frozen=True)
class KernelEvaluator:
    """Fractional kernels of order ``s`` on a model domain.

    Parameters
    ----------
    domain : SpectralDomain
    s : float
        Order in ``(0, 1]``; ``s = 1`` gives the classical kernels.  The jumping
        kernel and killing measure need ``s < 1``.
    heat : HeatKernelEvaluator, optional
    plan : TimeQuadrature, optional
    """

    domain: SpectralDomain
    s: float
    heat: HeatKernelEvaluator | None = None
    plan: TimeQuadrature = field(default_factory=TimeQuadrature)

    def __post_init__(self):
        object.__setattr__(self, "s", check_order(self.s))
        if self.heat is None:
            object.__setattr__(self, "heat", HeatKernelEvaluator(self.domain))
        elif self.heat.domain != self.domain:
            raise InvalidConfigurationError("heat kernel built for another domain")

    @property
    def t_switch(self) -> float:
        return self.heat.t_switch

    # -- plumbing ----------------------------------------------------------

    def _points(self, x, interior=False):
        p = self.heat._points(x)
        if interior and np.any(self.domain.delta(p) <= 0):
            raise InvalidArgumentError("point must be strictly inside the domain")
        return p

    @staticmethod
    def _pair(px, py):
        n = max(len(px), len(py))
        return (np.ascontiguousarray(np.broadcast_to(px, (n, px.shape[1]))),
                np.ascontiguousarray(np.broadcast_to(py, (n, py.shape[1]))))

    def _integrate(self, x, y, face, t0, mode, a):
        """``int_0^T f t^a dt`` with the backend, split over threads if allowed."""
        plan = self.plan
        nt, nw = plan.near_rule
        ft, fw = plan.far_rule
        face = np.ascontiguousarray(face, dtype=np.int64)
        t0 = np.ascontiguousarray(t0, dtype=float)
        args = (np.asarray(self.domain.lengths), mode, a, self.t_switch,
                nt, nw, ft, fw, plan.far_width, plan.min_far, self.heat.images)

        def run(sl):
            return _backend.time_integral(x[sl], y[sl], face[sl], t0[sl], *args)

        n = len(x)
        k = thread_count()
        if k == 1 or n < 64:
            return run(slice(0, n))
        edges = np.linspace(0, n, k + 1).astype(int)
        with ThreadPoolExecutor(k) as ex:
            parts = list(ex.map(run, [slice(edges[i], edges[i + 1]) for i in range(k)]))
        return np.concatenate(parts)

    @cached_property
    def _tail_modes(self):
        lam = self.domain.eigenvalues
        keep = lam * self.t_switch <= _TAIL_CUT
        idx = self.domain.mode_indices[keep]
        return idx, lam[keep], self.domain.mode_integrals()[keep]

    def _tail_phi(self, p, idx):
        out = np.ones((len(p), len(idx)))
        for k, L in enumerate(self.domain.lengths):
            out *= math.sqrt(2.0 / L) * np.sin(np.outer(p[:, k], idx[:, k] * math.pi / L))
        return out

    def _tail_normal(self, z, codes, idx):
        out = np.ones((len(z), len(idx)))
        for k, L in enumerate(self.domain.lengths):
            w = idx[:, k] * math.pi / L
            on = (codes // 2 == k)[:, None]
            sign = np.where(codes % 2 == 0, 1.0, -1.0)[:, None]
            der = sign * math.sqrt(2.0 / L) * w * np.cos(np.outer(z[:, k], w))
            val = math.sqrt(2.0 / L) * np.sin(np.outer(z[:, k], w))
            out *= np.where(on, der, val)
        return out

    # -- kernels -----------------------------------------------------------

    def green(self, x, y):
        """``G^s(x, y) = Gamma(s)^-1 int_0^inf p(t, x, y) t^(s-1) dt``."""
        px, py = self._pair(self._points(x), self._points(y))
        r2 = np.sum((px - py) ** 2, axis=1)
        if np.any(r2 == 0):
            raise OnDiagonalError("Green function requested on the diagonal")
        s = self.s
        face = np.zeros(len(px), dtype=np.int64)
        near = self._integrate(px, py, face, r2, _backend.MODE_KERNEL, s - 1.0) / gamma(s)
        idx, lam, _ = self._tail_modes
        w = lam ** (-s) * gammaincc(s, lam * self.t_switch)
        far = np.einsum("ij,j,ij->i", self._tail_phi(px, idx), w, self._tail_phi(py, idx))
        return _out(near + far, x, y, self.domain.dim)

    def poisson(self, x, z):
        """``P^s(x, z) = -Gamma(s)^-1 int_0^inf d_nu p(t, x, z) t^(s-1) dt``."""
        px, pz = self._pair(self._points(x, interior=True), self._points(z))
        codes = self.domain.face_of(pz)
        s = self.s
        r2 = np.sum((px - pz) ** 2, axis=1)
        near = self._integrate(px, pz, codes, r2, _backend.MODE_NORMAL, s - 1.0) / gamma(s)
        idx, lam, _ = self._tail_modes
        w = lam ** (-s) * gammaincc(s, lam * self.t_switch)
        far = np.einsum("ij,j,ij->i", self._tail_phi(px, idx), w,
                        self._tail_normal(pz, codes, idx))
        return _out(near + far, x, z, self.domain.dim)

    def jumping_kernel(self, x, y):
        """``J(x, y) = s/Gamma(1-s) int_0^inf p(t, x, y) t^(-1-s) dt``."""
        s = check_order(self.s, allow_one=False)
        px, py = self._pair(self._points(x), self._points(y))
        r2 = np.sum((px - py) ** 2, axis=1)
        if np.any(r2 == 0):
            raise OnDiagonalError("jumping kernel requested on the diagonal")
        face = np.zeros(len(px), dtype=np.int64)
        near = self._integrate(px, py, face, r2, _backend.MODE_KERNEL, -1.0 - s)
        idx, lam, _ = self._tail_modes
        w = lam ** s * upper_gamma(-s, lam * self.t_switch)
        far = np.einsum("ij,j,ij->i", self._tail_phi(px, idx), w, self._tail_phi(py, idx))
        return _out((near + far) * s / gamma(1.0 - s), x, y, self.domain.dim)

    def killing_measure(self, x):
        """``kappa(x) = s/Gamma(1-s) int_0^inf (1 - S(t, x)) t^(-1-s) dt``."""
        s = check_order(self.s, allow_one=False)
        px = self._points(x, interior=True)
        T = self.t_switch
        face = np.zeros(len(px), dtype=np.int64)
        t0 = self.domain.delta(px) ** 2
        near = self._integrate(px, px, face, t0, _backend.MODE_KILL, -1.0 - s)
        idx, lam, c = self._tail_modes
        w = c * lam ** s * upper_gamma(-s, lam * T)
        far = T ** (-s) / s - self._tail_phi(px, idx) @ w
        return _out((near + far) * s / gamma(1.0 - s), x, None, self.domain.dim)

    def h1(self, x):
        """``h1(x) = int over the boundary of P^s(x, z) d sigma(z)``.

        On the interval this is the sum of the two endpoint kernels.  On the
        rectangle the boundary integral of the normal derivative of ``p`` is
        the rate of loss of mass ``-dS/dt``; integrating by parts in ``t``
        turns ``h1`` into ``(1-s)/Gamma(s) int_0^inf (1 - S) t^(s-2) dt``,
        which needs no boundary quadrature.
        """
        px = self._points(x, interior=True)
        if self.domain.dim == 1:
            L = self.domain.lengths[0]
            n = len(px)
            z = np.concatenate([np.zeros((n, 1)), np.full((n, 1), L)])
            v = self.poisson(np.concatenate([px, px]), z)
            return _out(v[:n] + v[n:], x, None, 1)
        return self._h1_flux(px, x)

    def _h1_flux(self, px, x=None):
        s = self.s
        if s == 1.0:
            return _out(np.ones(len(px)), px if x is None else x, None, self.domain.dim)
        T = self.t_switch
        face = np.zeros(len(px), dtype=np.int64)
        t0 = self.domain.delta(px) ** 2
        near = self._integrate(px, px, face, t0, _backend.MODE_KILL, s - 2.0)
        idx, lam, c = self._tail_modes
        w = c * lam ** (1.0 - s) * upper_gamma(s - 1.0, lam * T)
        far = T ** (s - 1.0) / (1.0 - s) - self._tail_phi(px, idx) @ w
        return _out((near + far) * (1.0 - s) / gamma(s), px if x is None else x, None,
                    self.domain.dim)

    def green_of_one(self, x):
        """``(G^s 1)(x) = int G^s(x, y) dy``, the solution with unit right-hand side."""
        px = self._points(x)
        s = self.s
        T = self.t_switch
        face = np.zeros(len(px), dtype=np.int64)
        t0 = np.maximum(self.domain.delta(px) ** 2, 1e-300)
        killed = self._integrate(px, px, face, t0, _backend.MODE_KILL, s - 1.0)
        idx, lam, c = self._tail_modes
        w = c * lam ** (-s) * gammaincc(s, lam * T)
        v = (T ** s / s - killed) / gamma(s) + self._tail_phi(px, idx) @ w
        return _out(v, x, None, self.domain.dim)

    def green_matrix(self, x, y) -> np.ndarray:
        """``G^s(x_i, y_j)`` for all pairs; raises on coincident points."""
        px, py = self._points(x), self._points(y)
        X = np.repeat(px, len(py), axis=0)
        Y = np.tile(py, (len(px), 1))
        return self.green(X, Y).reshape(len(px), len(py))


def _out(v, x, y, dim):
    def pointlike(a):
        if a is None:
            return True
        a = np.asarray(a)
        return a.ndim == 0 if dim == 1 else a.ndim == 1
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NumericInputError("kernel evaluation produced non-finite values")
    if pointlike(x) and pointlike(y) and v.size == 1:
        return float(v[0])
    return v


def build_evaluator(domain: SpectralDomain, s: float, plan: TimeQuadrature | None = None,
                    images: int = 8) -> KernelEvaluator:
    heat = HeatKernelEvaluator(domain, images=images)
    return KernelEvaluator(domain, s, heat, plan or TimeQuadrature())
