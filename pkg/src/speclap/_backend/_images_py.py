"""Pure numpy implementation of the short-time heat-kernel time integrals.

Mirrors ``_images.pyx`` exactly (same arguments, same quadrature, same image
truncation rule) so the two can be swapped at import time.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

MODE_KERNEL = 0
MODE_NORMAL = 1
MODE_KILL = 2

# Image terms more than this many e-folds below the leading one are dropped.
_CUTOFF = 60.0


def _image_value(t, x, y, L, nmax):
    """Interval (0, L) Dirichlet heat kernel by reflected Gaussians.

    Each reflected pair ``g(a - y) - g(a + y)`` with ``a = x + 2nL`` is written
    as ``sign(a) g(|a| - y) (1 - exp(-|a| y / t))`` so no cancellation occurs
    when ``x`` or ``y`` is close to 0.
    """
    s2 = 4.0 * t
    pref = 1.0 / np.sqrt(np.pi * s2)
    e0 = np.minimum((x - y) ** 2, (2.0 * L - x - y) ** 2) / s2
    out = np.zeros(np.broadcast_shapes(t.shape, x.shape, y.shape))
    for n in _order(nmax):
        a = x + 2.0 * n * L
        b = np.abs(a)
        ex = (b - y) ** 2 / s2
        keep = ex <= e0 + _CUTOFF
        if not np.any(keep):
            continue
        term = np.exp(-ex) * -np.expm1(-b * y / t)
        out += np.where(keep, np.sign(a) * term, 0.0)
    return pref * out


def _image_normal(t, x, L, nmax):
    """``d/dy p(t, x, y)`` at ``y = 0`` (inward normal derivative at the face 0)."""
    s2 = 4.0 * t
    pref = 1.0 / np.sqrt(np.pi * s2)
    e0 = np.minimum(x, 2.0 * L - x) ** 2 / s2
    out = np.zeros(np.broadcast_shapes(t.shape, x.shape))
    for n in _order(nmax):
        a = x + 2.0 * n * L
        ex = a * a / s2
        keep = ex <= e0 + _CUTOFF
        if not np.any(keep):
            continue
        out += np.where(keep, a * np.exp(-ex), 0.0)
    return 4.0 * pref * out / s2


def _image_killed(t, x, L, nmax):
    """Probability of having hit the boundary by time ``t`` (1 - survival).

    Alternating erfc series; every term has a positive argument.
    """
    sig = np.sqrt(4.0 * t)
    out = np.zeros(np.broadcast_shapes(t.shape, x.shape))
    zmin = np.minimum(x, L - x) / sig
    lim = np.sqrt(zmin ** 2 + _CUTOFF)
    for m in range(2 * nmax + 2):
        z1 = (x + m * L) / sig
        z2 = ((m + 1) * L - x) / sig
        if np.all(z1 > lim) and np.all(z2 > lim):
            break
        sgn = 1.0 if m % 2 == 0 else -1.0
        out += sgn * (erfc(z1) + erfc(z2))
    return out


def _order(nmax):
    yield 0
    for n in range(1, nmax + 1):
        yield -n
        yield n


def _integrand(t, x, y, face, lengths, mode, nmax):
    d = len(lengths)
    if mode == MODE_KILL:
        q = [_image_killed(t, x[:, k:k + 1], lengths[k], nmax) for k in range(d)]
        if d == 1:
            return q[0]
        return q[0] + q[1] - q[0] * q[1]
    val = np.ones_like(t)
    for k in range(d):
        xk = x[:, k:k + 1]
        yk = y[:, k:k + 1]
        if mode == MODE_NORMAL:
            axis = face // 2
            side = face % 2
            on = (axis == k)[:, None]
            xr = np.where(side[:, None] == 0, xk, lengths[k] - xk)
            dn = _image_normal(t, xr, lengths[k], nmax)
            pv = _image_value(t, xk, yk, lengths[k], nmax) if d > 1 else 0.0
            val = val * np.where(on, dn, pv)
        else:
            val = val * _image_value(t, xk, yk, lengths[k], nmax)
    return val


def time_integral(x, y, face, t0, lengths, mode, a, t_split,
                  near_t, near_w, far_t, far_w, far_width, min_far, nmax):
    """Integrate ``f(t) t**a`` over ``(0, t_split]`` for each pair.

    ``f`` is the heat kernel (mode 0), its inward normal derivative at a
    boundary point ``y`` on face ``face`` (mode 1) or the killed probability
    ``1 - S(t, x)`` (mode 2).  ``(0, min(t0, t_split)]`` uses the scaled rule
    ``near_t/near_w``; the rest uses composite panels of ``far_t/far_w`` in
    ``log t``, each at most ``far_width`` e-folds wide.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    face = np.asarray(face, dtype=np.int64)
    lengths = tuple(float(v) for v in lengths)
    T = float(t_split)
    ta = np.minimum(np.asarray(t0, dtype=float), T)
    n = len(x)
    out = np.zeros(n)
    chunk = max(1, 4096 // max(1, len(near_t)))
    for s in range(0, n, chunk):
        sl = slice(s, s + chunk)
        tt = ta[sl, None] * near_t[None, :]
        f = _integrand(tt, x[sl], y[sl], face[sl], lengths, mode, nmax)
        out[sl] += np.sum(f * tt ** a * near_w[None, :], axis=1) * ta[sl]
    span = np.log(T / ta)
    panels = np.where(span > 0, np.maximum(min_far, np.ceil(span / far_width)), 0).astype(int)
    for P in np.unique(panels):
        if P == 0:
            continue
        idx = np.nonzero(panels == P)[0]
        u = (np.arange(P)[:, None] + far_t[None, :]).ravel() / P
        w = np.tile(far_w, P) / P
        for s in range(0, len(idx), max(1, 4096 // len(u))):
            ii = idx[s:s + max(1, 4096 // len(u))]
            h = span[ii, None]
            tt = ta[ii, None] * np.exp(h * u[None, :])
            f = _integrand(tt, x[ii], y[ii], face[ii], lengths, mode, nmax)
            out[ii] += np.sum(f * tt ** (a + 1.0) * w[None, :], axis=1) * span[ii]
    return out


def heat_values(t, x, y, lengths, nmax):
    """Image-sum heat kernel at arbitrary (t, x, y) triples, shape (n,)."""
    t = np.asarray(t, dtype=float).reshape(-1, 1)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    face = np.full(len(x), -1, dtype=np.int64)
    return _integrand(t, x, y, face, tuple(lengths), MODE_KERNEL, nmax)[:, 0]


def image_count(t_split, L):
    """Smallest per-side image count with no underflow-visible terms dropped."""
    return int(math.ceil((math.sqrt(745.0 * 4.0 * t_split) + 2.0 * L) / (2.0 * L)))
