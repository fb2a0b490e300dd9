# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Signatures mirror ``_core_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, fabs, floor, fmod, INFINITY, NAN
from scipy.linalg.cython_blas cimport ddot

cnp.import_array()


cdef inline double _series_loglik(double xi, double a) noexcept nogil:
    cdef double a2 = a * a
    cdef double a3 = a2 * a
    cdef double c1 = 0.5 * a2 - 2.0 * a + 1.0
    cdef double c2 = -a3 / 3.0 + 1.5 * a2 - a - 0.5
    cdef double c3 = 0.25 * a2 * a2 - 4.0 * a3 / 3.0 + 1.5 * a2 + 1.0 / 3.0
    return -a + xi * (c1 + xi * (c2 + xi * c3))


cdef inline double _series_dxi(double xi, double a) noexcept nogil:
    cdef double a2 = a * a
    cdef double a3 = a2 * a
    cdef double d0 = 0.5 * a2 - 2.0 * a + 1.0
    cdef double d1 = -2.0 * a3 / 3.0 + 3.0 * a2 - 2.0 * a - 1.0
    cdef double d2 = 0.75 * a2 * a2 - 4.0 * a3 + 4.5 * a2 + 1.0
    return d0 + xi * (d1 + xi * d2)


def _flat(y, xi, nu):
    # scalar parameters broadcast against y, as in the numpy version
    return [np.ascontiguousarray(v, dtype=np.float64).ravel()
            for v in np.broadcast_arrays(np.asarray(y, dtype=np.float64), xi, nu)]


def gpd_loglik(y, xi, nu, double tol):
    cdef const double[::1] yv, xv, nv
    yv, xv, nv = _flat(y, xi, nu)
    cdef Py_ssize_t n = yv.shape[0], i
    cdef double total = 0.0, a, x, s, yi, nui
    cdef bint ok = True
    with nogil:
        for i in range(n):
            s = xv[i]
            nui = nv[i]
            yi = yv[i]
            if nui <= 0.0 or 1.0 + s <= 0.0 or yi < 0.0:
                ok = False
                break
            a = yi / nui
            x = s * (1.0 + s) * a
            if 1.0 + x <= 0.0:
                ok = False
                break
            if fabs(s) < tol:
                total += _series_loglik(s, a) - log(nui)
            else:
                total += log1p(s) - log(nui) - (1.0 + s) / s * log1p(x)
    if not ok:
        return -INFINITY
    return total


def gpd_score(y, xi, nu, double tol):
    cdef const double[::1] yv, xv, nv
    yv, xv, nv = _flat(y, xi, nu)
    cdef Py_ssize_t n = yv.shape[0], i
    dxi_arr = np.empty(n)
    dnu_arr = np.empty(n)
    cdef double[::1] dxi = dxi_arr
    cdef double[::1] dnu = dnu_arr
    cdef double a, x, g, s, nui, yi
    cdef bint ok = True
    with nogil:
        for i in range(n):
            s = xv[i]
            nui = nv[i]
            yi = yv[i]
            if nui <= 0.0 or 1.0 + s <= 0.0 or yi < 0.0:
                ok = False
                break
            a = yi / nui
            x = s * (1.0 + s) * a
            g = 1.0 + x
            if g <= 0.0:
                ok = False
                break
            dnu[i] = (-1.0 + (1.0 + s) * (1.0 + s) * a / g) / nui
            if fabs(s) < tol:
                dxi[i] = _series_dxi(s, a)
            else:
                dxi[i] = 1.0 / (1.0 + s) + (log1p(x) - (1.0 + 2.0 * s) * x / g) / (s * s)
    if not ok:
        dxi_arr.fill(NAN)
        dnu_arr.fill(NAN)
        return dxi_arr, dnu_arr, False
    return dxi_arr, dnu_arr, True


def sector_maxima(angles, sizes, double width):
    cdef const double[::1] th = np.ascontiguousarray(angles, dtype=np.float64).ravel()
    cdef const double[::1] sz = np.ascontiguousarray(sizes, dtype=np.float64).ravel()
    cdef Py_ssize_t n = th.shape[0], i, k
    cdef Py_ssize_t n_sectors = <Py_ssize_t>(360.0 / width + 0.5)
    out_arr = np.zeros(n_sectors + 1)
    cdef double[::1] out = out_arr
    cdef double u
    with nogil:
        for i in range(n):
            u = fmod(th[i] + 0.5 * width, 360.0)
            if u < 0.0:
                u += 360.0
            k = <Py_ssize_t>floor(u / width)
            if k >= n_sectors:
                k = n_sectors - 1
            if sz[i] > out[k]:
                out[k] = sz[i]
            if sz[i] > out[n_sectors]:
                out[n_sectors] = sz[i]
    return out_arr


cdef inline double _lag_dot(double[::1] d, Py_ssize_t m, Py_ssize_t lag) noexcept nogil:
    cdef int n = <int>(m - lag), one = 1
    return ddot(&n, &d[0], &one, &d[lag], &one)


def ips_tau(x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef Py_ssize_t m = xv.shape[0], i, k, lag0, lag1, max_lag
    if m == 0:
        return 1.0
    d_arr = np.asarray(xv) - np.mean(xv)
    cdef double[::1] d = d_arr
    cdef double gamma0 = 0.0, s0, s1, pair, total = 0.0
    with nogil:
        for i in range(m):
            gamma0 += d[i] * d[i]
    gamma0 /= m
    if gamma0 <= 0.0:
        return 1.0
    max_lag = m // 2
    k = 0
    with nogil:
        while 2 * k + 1 <= max_lag:
            lag0 = 2 * k
            lag1 = lag0 + 1
            if lag0 == 0:
                s0 = gamma0 * m
            else:
                s0 = _lag_dot(d, m, lag0)
            s1 = _lag_dot(d, m, lag1)
            pair = (s0 + s1) / m / gamma0
            if pair <= 0.0:
                break
            total += pair
            k += 1
    total = -1.0 + 2.0 * total
    if total < 1.0 / m:
        total = 1.0 / m
    return total
