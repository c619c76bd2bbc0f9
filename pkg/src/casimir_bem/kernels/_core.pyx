# cython: language_level=3
"""Compiled triangle-pair moment kernels (same contract as ``_fallback``)."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, expm1, sqrt, M_PI

cnp.import_array()

DEF NM = 18

FULL = 0
REMAINDER = 1
DERIV = 2
STATIC = 3
NMOM = NM


cdef inline void _kernel(double R0, double R1, double R2, double kappa, int mode,
                         double a0, double a1, double a2,
                         double* g, double* v) noexcept nogil:
    cdef double r2 = R0 * R0 + R1 * R1 + R2 * R2
    cdef double r, inv, x, e, gp, gpp, c, re, b
    if mode == 1 and r2 == 0.0:
        g[0] = -kappa / (4.0 * M_PI)
        v[0] = 0.0
        v[1] = 0.0
        v[2] = 0.0
        return
    r = sqrt(r2)
    inv = 1.0 / (4.0 * M_PI * r)
    if mode == 3:
        g[0] = inv
        c = -inv / r2
    elif mode == 0:
        x = kappa * r
        e = exp(-x)
        g[0] = e * inv
        c = -(1.0 + x) * e * inv / r2
    elif mode == 1:
        x = kappa * r
        e = exp(-x)
        g[0] = expm1(-x) * inv
        c = (1.0 - (1.0 + x) * e) * inv / r2
    else:
        x = kappa * r
        e = exp(-x)
        gp = -(1.0 + x) * e * inv / r
        gpp = (2.0 + 2.0 * x + x * x) * e * inv / r2
        re = R0 * a0 + R1 * a1 + R2 * a2
        g[0] = -gp * re / r
        c = gp / r
        b = (gpp - c) * re / r2
        v[0] = -(c * a0 + b * R0)
        v[1] = -(c * a1 + b * R1)
        v[2] = -(c * a2 + b * R2)
        return
    v[0] = c * R0
    v[1] = c * R1
    v[2] = c * R2


cdef inline void _acc(double* o, double w, double g, double* v,
                      double u0, double u1, double u2,
                      double p0, double p1, double p2) noexcept nogil:
    cdef double wg = w * g
    cdef double x0, x1, x2
    o[0] += wg
    o[1] += wg * u0
    o[2] += wg * u1
    o[3] += wg * u2
    o[4] += wg * p0
    o[5] += wg * p1
    o[6] += wg * p2
    o[7] += wg * (u0 * p0 + u1 * p1 + u2 * p2)
    # v x u'
    x0 = v[1] * p2 - v[2] * p1
    x1 = v[2] * p0 - v[0] * p2
    x2 = v[0] * p1 - v[1] * p0
    o[8] += w * (u0 * x0 + u1 * x1 + u2 * x2)
    o[9] += w * (u1 * v[2] - u2 * v[1])
    o[10] += w * (u2 * v[0] - u0 * v[2])
    o[11] += w * (u0 * v[1] - u1 * v[0])
    o[12] += w * x0
    o[13] += w * x1
    o[14] += w * x2
    o[15] += w * v[0]
    o[16] += w * v[1]
    o[17] += w * v[2]


def regular_moments(const double[:, :, ::1] pts_a, const double[:, ::1] w_a,
                    const double[:, ::1] cen_a, const double[:, :, ::1] pts_b,
                    const double[:, ::1] w_b, const double[:, ::1] cen_b,
                    ia, ib, double kappa, int mode=0, axis=None):
    """Tensor-product quadrature over triangle pairs (ia[p], ib[p])."""
    cdef const cnp.int64_t[::1] A = np.ascontiguousarray(ia, dtype=np.int64)
    cdef const cnp.int64_t[::1] B = np.ascontiguousarray(ib, dtype=np.int64)
    cdef Py_ssize_t P = A.shape[0], na = pts_a.shape[1], nb = pts_b.shape[1]
    out_arr = np.zeros((P, NM))
    cdef double[:, ::1] out = out_arr
    cdef double a0 = 0.0, a1 = 0.0, a2 = 0.0
    if axis is not None:
        a0, a1, a2 = [float(t) for t in axis]
    cdef Py_ssize_t p, i, j
    cdef cnp.int64_t ta, tb
    cdef double g
    cdef double v[3]
    cdef double x0, x1, x2, y0, y1, y2
    for p in prange(P, nogil=True, schedule="static"):
        ta = A[p]
        tb = B[p]
        for i in range(na):
            x0 = pts_a[ta, i, 0]
            x1 = pts_a[ta, i, 1]
            x2 = pts_a[ta, i, 2]
            for j in range(nb):
                y0 = pts_b[tb, j, 0]
                y1 = pts_b[tb, j, 1]
                y2 = pts_b[tb, j, 2]
                _kernel(x0 - y0, x1 - y1, x2 - y2, kappa, mode, a0, a1, a2, &g, v)
                _acc(&out[p, 0], w_a[ta, i] * w_b[tb, j], g, v,
                     x0 - cen_a[ta, 0], x1 - cen_a[ta, 1], x2 - cen_a[ta, 2],
                     y0 - cen_b[tb, 0], y1 - cen_b[tb, 1], y2 - cen_b[tb, 2])
    return out_arr


def singular_moments(corn_a, corn_b, cen_a, cen_b, bary_a, bary_b, weights,
                     scale, double kappa, int mode=3):
    """Moments on explicit point pairs shared by all triangle pairs."""
    cdef const double[:, :, ::1] ca = np.ascontiguousarray(corn_a, dtype=float)
    cdef const double[:, :, ::1] cb = np.ascontiguousarray(corn_b, dtype=float)
    cdef const double[:, ::1] ea = np.ascontiguousarray(cen_a, dtype=float)
    cdef const double[:, ::1] eb = np.ascontiguousarray(cen_b, dtype=float)
    cdef const double[:, ::1] ba = np.ascontiguousarray(bary_a, dtype=float)
    cdef const double[:, ::1] bb = np.ascontiguousarray(bary_b, dtype=float)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=float)
    cdef const double[::1] sc = np.ascontiguousarray(scale, dtype=float)
    cdef Py_ssize_t P = ca.shape[0], N = w.shape[0]
    out_arr = np.zeros((P, NM))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t p, k, d
    cdef double g
    cdef double v[3]
    cdef double x[3]
    cdef double y[3]
    for p in prange(P, nogil=True, schedule="dynamic"):
        for k in range(N):
            for d in range(3):
                x[d] = ba[k, 0] * ca[p, 0, d] + ba[k, 1] * ca[p, 1, d] + ba[k, 2] * ca[p, 2, d]
                y[d] = bb[k, 0] * cb[p, 0, d] + bb[k, 1] * cb[p, 1, d] + bb[k, 2] * cb[p, 2, d]
            _kernel(x[0] - y[0], x[1] - y[1], x[2] - y[2], kappa, mode, 0.0, 0.0, 0.0, &g, v)
            _acc(&out[p, 0], sc[p] * w[k], g, v,
                 x[0] - ea[p, 0], x[1] - ea[p, 1], x[2] - ea[p, 2],
                 y[0] - eb[p, 0], y[1] - eb[p, 1], y[2] - eb[p, 2])
    return out_arr
