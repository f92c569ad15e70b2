"""Dirichlet heat kernel on the model domains.

Short times use reflected Gaussians, long times the eigenfunction sum; the
two agree at ``t_switch`` to roughly machine precision.  On the rectangle
every quantity factorizes over the axes, so only 1D kernels are evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .domain import SpectralDomain
from .errors import InvalidArgumentError, NumericInputError


def _times(t) -> np.ndarray:
    ta = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(ta)):
        raise NumericInputError("non-finite time")
    if np.any(ta <= 0):
        raise InvalidArgumentError("time must be positive")
    return ta


@dataclass(frozen=True)
class HeatKernelEvaluator:
    """Dual-representation heat kernel ``p(t, x, y)`` of a model domain.

    Parameters
    ----------
    domain : SpectralDomain
    t_switch : float, optional
        Times below use images, times at or above use the eigen-sum.
        Defaults to ``min(L)^2 / (2 pi^2)``.
    images : int
        Reflections kept on each side (terms 60 e-folds below the leading
        one are skipped anyway).
    """

    domain: SpectralDomain
    t_switch: float | None = None
    images: int = 8

    def __post_init__(self):
        if self.t_switch is None:
            object.__setattr__(self, "t_switch", self.domain.t_switch)
        if not self.t_switch > 0:
            raise InvalidArgumentError("t_switch must be positive")
        if self.images < 1:
            raise InvalidArgumentError("need at least one image per side")

    # -- 1D factors --------------------------------------------------------

    def _axis_series(self, axis, t, x, y=None, kind="value"):
        L = self.domain.lengths[axis]
        J = self.domain.truncation[axis]
        k = np.arange(1, J + 1) * (math.pi / L)
        e = np.exp(-np.outer(t, k * k))
        sx = np.sin(np.outer(x, k))
        if kind == "value":
            return (2.0 / L) * np.sum(e * sx * np.sin(np.outer(y, k)), axis=1)
        if kind == "normal":  # d/dy at y = 0
            return (2.0 / L) * np.sum(e * sx * k, axis=1)
        # survival: c_j = sqrt(2/L) * 2L/(j pi) for odd j
        j = np.arange(1, J + 1)
        c = np.where(j % 2 == 1, 4.0 / (j * math.pi), 0.0)
        return np.sum(e * sx * c, axis=1)

    def _axis(self, axis, t, x, y=None, kind="value"):
        L = self.domain.lengths[axis]
        t = np.broadcast_to(t, x.shape).astype(float)
        out = np.empty(len(x))
        short = t < self.t_switch
        if np.any(~short):
            long_ = ~short
            out[long_] = self._axis_series(axis, t[long_], x[long_],
                                           None if y is None else y[long_], kind)
        if np.any(short):
            ts, xs = t[short], x[short]
            if kind == "value":
                out[short] = _backend.heat_values(ts, xs[:, None], y[short][:, None],
                                                  (L,), self.images)
            elif kind == "normal":
                out[short] = _backend._images_py._image_normal(
                    ts[:, None], xs[:, None], L, self.images)[:, 0]
            else:
                out[short] = 1.0 - _backend._images_py._image_killed(
                    ts[:, None], xs[:, None], L, self.images)[:, 0]
        return out

    def _points(self, x, closed=True):
        p = self.domain.as_points(x)
        if not np.all(np.isfinite(p)):
            raise NumericInputError("non-finite point")
        L = np.asarray(self.domain.lengths)
        tol = 1e-12 * self.domain.diam
        if np.any(p < -tol) or np.any(p > L + tol):
            raise InvalidArgumentError("point outside the domain")
        return np.clip(p, 0.0, L)

    # -- public ------------------------------------------------------------

    def kernel(self, t, x, y):
        """``p(t, x, y)``; zero when ``x`` or ``y`` is on the boundary."""
        ta = _times(t)
        px, py = self._points(x), self._points(y)
        n = max(len(px), len(py), ta.size)
        px = np.broadcast_to(px, (n, px.shape[1]))
        py = np.broadcast_to(py, (n, py.shape[1]))
        tt = np.broadcast_to(ta.reshape(-1), (n,))
        out = np.ones(n)
        for k in range(self.domain.dim):
            out *= self._axis(k, tt, px[:, k], py[:, k])
        return _maybe_scalar(out, t, x, y, self.domain.dim)

    def survival(self, t, x):
        """``int p(t, x, y) dy``, the probability of not having been killed."""
        ta = _times(t)
        px = self._points(x)
        n = max(len(px), ta.size)
        px = np.broadcast_to(px, (n, px.shape[1]))
        tt = np.broadcast_to(ta.reshape(-1), (n,))
        out = np.ones(n)
        for k in range(self.domain.dim):
            out *= self._axis(k, tt, px[:, k], kind="survival")
        return _maybe_scalar(out, t, x, None, self.domain.dim)

    def boundary_normal_derivative(self, t, x, z):
        """``-d/d nu_z p(t, x, z)`` for ``z`` on the boundary (positive inside)."""
        ta = _times(t)
        px = self._points(x)
        pz = self._points(z)
        codes = self.domain.face_of(pz)
        n = max(len(px), len(pz), ta.size)
        px = np.broadcast_to(px, (n, px.shape[1]))
        pz = np.broadcast_to(pz, (n, pz.shape[1]))
        codes = np.broadcast_to(codes, (n,))
        tt = np.broadcast_to(ta.reshape(-1), (n,))
        out = np.ones(n)
        for k in range(self.domain.dim):
            L = self.domain.lengths[k]
            on = codes // 2 == k
            xr = np.where(codes % 2 == 0, px[:, k], L - px[:, k])
            f = np.empty(n)
            if np.any(on):
                f[on] = self._axis(k, tt[on], xr[on], kind="normal")
            if np.any(~on):
                f[~on] = self._axis(k, tt[~on], px[~on, k], pz[~on, k])
            out *= f
        return _maybe_scalar(out, t, x, z, self.domain.dim)

    def propagate(self, coefficients, t) -> np.ndarray:
        """Eigen-coefficients of ``e^{t Delta} u`` given those of ``u``."""
        ta = float(_times(t))
        return np.asarray(coefficients) * np.exp(-self.domain.eigenvalues * ta)


def _maybe_scalar(out, t, x, y, dim):
    def pointlike(a):
        if a is None:
            return True
        a = np.asarray(a)
        return a.ndim == 0 if dim == 1 else a.ndim == 1
    if np.ndim(t) == 0 and pointlike(x) and pointlike(y) and out.size == 1:
        return float(out[0])
    return out
