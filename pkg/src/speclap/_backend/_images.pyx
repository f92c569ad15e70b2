# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled short-time heat-kernel time integrals.

Same contract as ``_images_py.time_integral``; see that module for the maths.
"""

import numpy as np

from libc.math cimport ceil, erfc, exp, expm1, fabs, log, sqrt, M_PI

DEF CUTOFF = 60.0


cdef inline int _image_index(int k) noexcept nogil:
    # 0, -1, 1, -2, 2, ...
    if k == 0:
        return 0
    if k % 2 == 1:
        return -((k + 1) // 2)
    return k // 2


cdef double _value(double t, double x, double y, double L, int nmax) noexcept nogil:
    cdef double s2 = 4.0 * t
    cdef double e0 = (x - y) * (x - y)
    cdef double e1 = (2.0 * L - x - y) * (2.0 * L - x - y)
    cdef double acc = 0.0, a, b, ex, term
    cdef int k, n
    if e1 < e0:
        e0 = e1
    e0 = e0 / s2 + CUTOFF
    for k in range(2 * nmax + 1):
        n = _image_index(k)
        a = x + 2.0 * n * L
        b = fabs(a)
        ex = (b - y) * (b - y) / s2
        if ex > e0:
            continue
        term = exp(-ex) * (-expm1(-b * y / t))
        if a < 0.0:
            acc -= term
        else:
            acc += term
    return acc / sqrt(M_PI * s2)


cdef double _normal(double t, double x, double L, int nmax) noexcept nogil:
    cdef double s2 = 4.0 * t
    cdef double m = x if x < 2.0 * L - x else 2.0 * L - x
    cdef double e0 = m * m / s2 + CUTOFF
    cdef double acc = 0.0, a, ex
    cdef int k, n
    for k in range(2 * nmax + 1):
        n = _image_index(k)
        a = x + 2.0 * n * L
        ex = a * a / s2
        if ex > e0:
            continue
        acc += a * exp(-ex)
    return 4.0 * acc / (s2 * sqrt(M_PI * s2))


cdef double _killed(double t, double x, double L, int nmax) noexcept nogil:
    cdef double sig = sqrt(4.0 * t)
    cdef double zm = (x if x < L - x else L - x) / sig
    cdef double lim = sqrt(zm * zm + CUTOFF)
    cdef double acc = 0.0, z1, z2
    cdef int m
    for m in range(2 * nmax + 2):
        z1 = (x + m * L) / sig
        z2 = ((m + 1) * L - x) / sig
        if z1 > lim and z2 > lim:
            break
        if m % 2 == 0:
            acc += erfc(z1) + erfc(z2)
        else:
            acc -= erfc(z1) + erfc(z2)
    return acc


cdef double _integrand(double t, const double[:, ::1] x, const double[:, ::1] y,
                       Py_ssize_t i, long face, const double[::1] lengths, int d,
                       int mode, int nmax) noexcept nogil:
    cdef double val = 1.0, q0, q1
    cdef int k, axis, side
    if mode == 2:
        q0 = _killed(t, x[i, 0], lengths[0], nmax)
        if d == 1:
            return q0
        q1 = _killed(t, x[i, 1], lengths[1], nmax)
        return q0 + q1 - q0 * q1
    for k in range(d):
        if mode == 1 and face // 2 == k:
            side = face % 2
            if side == 0:
                val *= _normal(t, x[i, k], lengths[k], nmax)
            else:
                val *= _normal(t, lengths[k] - x[i, k], lengths[k], nmax)
        else:
            val *= _value(t, x[i, k], y[i, k], lengths[k], nmax)
    return val


def time_integral(x, y, face, t0, lengths, int mode, double a, double t_split,
                  near_t, near_w, far_t, far_w, double far_width, int min_far, int nmax):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const long[::1] fv = np.ascontiguousarray(face, dtype=np.int64)
    cdef const double[::1] t0v = np.ascontiguousarray(t0, dtype=np.float64)
    cdef const double[::1] Lv = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef const double[::1] nt = np.ascontiguousarray(near_t, dtype=np.float64)
    cdef const double[::1] nw = np.ascontiguousarray(near_w, dtype=np.float64)
    cdef const double[::1] ft = np.ascontiguousarray(far_t, dtype=np.float64)
    cdef const double[::1] fw = np.ascontiguousarray(far_w, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i, k, p
    cdef int d = Lv.shape[0], P
    cdef int nn = nt.shape[0], nf = ft.shape[0]
    out = np.zeros(n)
    cdef double[::1] ov = out
    cdef double ta, acc, tt, span, u, h
    with nogil:
        for i in range(n):
            ta = t0v[i]
            if ta > t_split:
                ta = t_split
            acc = 0.0
            for k in range(nn):
                tt = ta * nt[k]
                acc += nw[k] * _integrand(tt, xv, yv, i, fv[i], Lv, d, mode, nmax) * tt ** a
            acc *= ta
            span = log(t_split / ta)
            if span > 0.0:
                P = <int>ceil(span / far_width)
                if P < min_far:
                    P = min_far
                h = 0.0
                for p in range(P):
                    for k in range(nf):
                        u = (p + ft[k]) / P
                        tt = ta * exp(span * u)
                        h += fw[k] * _integrand(tt, xv, yv, i, fv[i], Lv, d, mode, nmax) * tt ** (a + 1.0)
                acc += h * span / P
            ov[i] = acc
    return out


def heat_values(t, x, y, lengths, int nmax):
    cdef const double[::1] tv = np.ascontiguousarray(np.ravel(t), dtype=np.float64)
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] Lv = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i
    cdef int d = Lv.shape[0]
    out = np.zeros(n)
    cdef double[::1] ov = out
    with nogil:
        for i in range(n):
            ov[i] = _integrand(tv[i], xv, yv, i, -1, Lv, d, 0, nmax)
    return out
