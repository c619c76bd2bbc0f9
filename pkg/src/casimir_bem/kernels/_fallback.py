"""Pure numpy implementation of the triangle-pair moment kernels.

Every routine returns per-pair moment vectors of length 18, laid out as

    [m0, mu(3), mu'(3), muu', c0, V1(3), V2(3), V3(3)]

where, with u = x - c_a, u' = x' - c_b and kernel values (g, v = grad g):
m0 = sum w g, mu = sum w g u, mu' = sum w g u', muu' = sum w g u.u',
c0 = sum w u.(v x u'), V1 = sum w u x v, V2 = sum w v x u', V3 = sum w v.
"""
from __future__ import annotations

import numpy as np

FULL, REMAINDER, DERIV, STATIC = 0, 1, 2, 3
NMOM = 18
FOUR_PI = 4.0 * np.pi
_CHUNK = 1 << 18


def kernel_values(R, kappa, mode, axis=None):
    """Scalar kernel and gradient for separation vectors ``R`` (..., 3)."""
    r = np.sqrt(np.einsum("...i,...i->...", R, R))
    if mode != REMAINDER:
        inv = 1.0 / (FOUR_PI * r)
    if mode == STATIC:
        g = inv
        gp = -inv / r
        return g, (gp / r)[..., None] * R
    x = kappa * r
    e = np.exp(-x)
    if mode == FULL:
        g = e * inv
        gp = -(1.0 + x) * e * inv / r
        return g, (gp / r)[..., None] * R
    if mode == REMAINDER:
        # bounded at r = 0: g -> -kappa / 4 pi, grad g -> 0
        zero = r == 0.0
        rs = np.where(zero, 1.0, r)
        inv = 1.0 / (FOUR_PI * rs)
        g = np.where(zero, -kappa / FOUR_PI, np.expm1(-x) * inv)
        q2 = 1.0 - (1.0 + x) * e
        return g, (q2 * inv / (rs * rs))[..., None] * R
    if mode == DERIV:
        ax = np.asarray(axis, dtype=float)
        gp = -(1.0 + x) * e * inv / r
        gpp = (2.0 + 2.0 * x + x * x) * e * inv / (r * r)
        re = R @ ax
        s = -gp * re / r
        a = gp / r
        b = (gpp - a) * re / (r * r)
        dv = -(a[..., None] * ax + b[..., None] * R)
        return s, dv
    raise ValueError(f"unknown kernel mode {mode}")


def _accumulate(u, up, w, g, v):
    # u, up, v: (P, N, 3); w, g: (P, N)
    wg = w * g
    out = np.empty((u.shape[0], NMOM))
    out[:, 0] = wg.sum(1)
    out[:, 1:4] = np.einsum("pn,pni->pi", wg, u)
    out[:, 4:7] = np.einsum("pn,pni->pi", wg, up)
    out[:, 7] = np.einsum("pn,pni,pni->p", wg, u, up)
    vxu = np.cross(v, up)
    out[:, 8] = np.einsum("pn,pni,pni->p", w, u, vxu)
    out[:, 9:12] = np.einsum("pn,pni->pi", w, np.cross(u, v))
    out[:, 12:15] = np.einsum("pn,pni->pi", w, vxu)
    out[:, 15:18] = np.einsum("pn,pni->pi", w, v)
    return out


def regular_moments(pts_a, w_a, cen_a, pts_b, w_b, cen_b, ia, ib, kappa,
                    mode=FULL, axis=None):
    """Tensor-product quadrature over triangle pairs (ia[p], ib[p]).

    ``pts_*`` are (F, n, 3) physical quadrature points, ``w_*`` (F, n)
    weights already scaled by the triangle area.
    """
    ia = np.asarray(ia, dtype=np.int64)
    ib = np.asarray(ib, dtype=np.int64)
    out = np.empty((len(ia), NMOM))
    na, nb = pts_a.shape[1], pts_b.shape[1]
    step = max(1, _CHUNK // (na * nb))
    for s in range(0, len(ia), step):
        a, b = ia[s:s + step], ib[s:s + step]
        x = pts_a[a][:, :, None, :]
        y = pts_b[b][:, None, :, :]
        R = x - y
        g, v = kernel_values(R, kappa, mode, axis)
        P = len(a)
        u = np.broadcast_to(x - cen_a[a][:, None, None, :], R.shape).reshape(P, -1, 3)
        up = np.broadcast_to(y - cen_b[b][:, None, None, :], R.shape).reshape(P, -1, 3)
        w = (w_a[a][:, :, None] * w_b[b][:, None, :]).reshape(P, -1)
        out[s:s + step] = _accumulate(u, up, w, g.reshape(P, -1), v.reshape(P, -1, 3))
    return out


def singular_moments(corn_a, corn_b, cen_a, cen_b, bary_a, bary_b, weights,
                     scale, kappa, mode=STATIC):
    """Moments on explicit point pairs shared by all triangle pairs.

    ``corn_*`` are (P, 3, 3) reordered corners; the point pair k sits at
    barycentric ``bary_a[k]`` on triangle a and ``bary_b[k]`` on b.
    ``scale`` (P,) multiplies the reference weights, normally 4 A_a A_b.
    """
    P, N = len(corn_a), len(weights)
    out = np.empty((P, NMOM))
    step = max(1, _CHUNK // N)
    for s in range(0, P, step):
        ca, cb = corn_a[s:s + step], corn_b[s:s + step]
        x = np.einsum("nk,pkj->pnj", bary_a, ca)
        y = np.einsum("nk,pkj->pnj", bary_b, cb)
        R = x - y
        g, v = kernel_values(R, kappa, mode)
        u = x - cen_a[s:s + step, None, :]
        up = y - cen_b[s:s + step, None, :]
        w = scale[s:s + step, None] * weights[None, :]
        out[s:s + step] = _accumulate(u, up, w, g, v)
    return out
