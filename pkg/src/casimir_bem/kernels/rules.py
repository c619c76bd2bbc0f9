"""Quadrature rules on triangles and intervals.

Triangle rules are returned as barycentric coordinates with weights that sum
to one (multiply by the triangle area).  Singular Galerkin rules follow the
Sauter-Schwab regularizing coordinate transforms on the reference triangle
{0 <= x2 <= x1 <= 1}; their weights sum to 1/4, the squared reference area.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


def _perms3(a, b, c):
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _orbit(a, b):
    # (a, b, b) and its cyclic images
    return [(a, b, b), (b, a, b), (b, b, a)]


def _rule(points, weights):
    bary = np.array(points, dtype=float)
    w = np.array(weights, dtype=float)
    bary.flags.writeable = False
    w.flags.writeable = False
    return bary, w


def _tri1():
    return _rule([(1 / 3, 1 / 3, 1 / 3)], [1.0])


def _tri3():
    return _rule(_orbit(2 / 3, 1 / 6), [1 / 3] * 3)


def _tri7():
    a1, b1, w1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
    a2, b2, w2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
    pts = [(1 / 3, 1 / 3, 1 / 3)] + _orbit(a1, b1) + _orbit(a2, b2)
    return _rule(pts, [0.225] + [w1] * 3 + [w2] * 3)


def _tri13():
    pts = [(1 / 3, 1 / 3, 1 / 3)]
    pts += _orbit(0.479308067841920, 0.260345966079040)
    pts += _orbit(0.869739794195568, 0.065130102902216)
    pts += _perms3(0.048690315425316, 0.312865496004874, 0.638444188569810)
    w = ([-0.149570044467682] + [0.175615257433208] * 3
         + [0.053347235608838] * 3 + [0.077113760890257] * 6)
    return _rule(pts, w)


def _subdivided(bary, w):
    """Apply a rule on each of the four midpoint sub-triangles."""
    e = np.eye(3)
    m = [(e[0] + e[1]) / 2, (e[1] + e[2]) / 2, (e[2] + e[0]) / 2]
    subs = [(e[0], m[0], m[2]), (m[0], e[1], m[1]),
            (m[2], m[1], e[2]), (m[1], m[2], m[0])]
    pts = [bary @ np.array(s) for s in subs]
    return _rule(np.vstack(pts), np.tile(w, 4) / 4)


@lru_cache(maxsize=None)
def triangle_rule(n: int):
    """Symmetric triangle rule with ``n`` points (1, 3, 7, 13 or 52).

    Returns
    -------
    bary : (n, 3) barycentric coordinates
    weights : (n,) summing to 1
    """
    if n == 1:
        return _tri1()
    if n == 3:
        return _tri3()
    if n == 7:
        return _tri7()
    if n == 13:
        return _tri13()
    if n == 52:
        return _subdivided(*_tri13())
    raise ValueError(f"no triangle rule with {n} points")


TRIANGLE_RULE_SIZES = (1, 3, 7, 13, 52)
# polynomial degree integrated exactly
TRIANGLE_RULE_DEGREE = {1: 1, 3: 2, 7: 5, 13: 7, 52: 7}


@lru_cache(maxsize=None)
def gauss_legendre01(n: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _ss_coincident(xi, e1, e2, e3):
    one = np.ones_like(xi)
    regions = [
        ((xi, xi * (1 - e1 + e1 * e2)), (xi * (1 - e1 * e2 * e3), xi * (1 - e1))),
        ((xi * (1 - e1 * e2 * e3), xi * (1 - e1)), (xi, xi * (1 - e1 + e1 * e2))),
        ((xi, xi * e1 * (1 - e2 + e2 * e3)), (xi * (1 - e1 * e2), xi * e1 * (1 - e2))),
        ((xi * (1 - e1 * e2), xi * e1 * (1 - e2)), (xi, xi * e1 * (1 - e2 + e2 * e3))),
        ((xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)), (xi, xi * e1 * (1 - e2))),
        ((xi, xi * e1 * (1 - e2)), (xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3))),
    ]
    jac = [xi ** 3 * e1 ** 2 * e2 * one] * 6
    return regions, jac


def _ss_edge(xi, e1, e2, e3):
    regions = [
        ((xi, xi * e1 * e3), (xi * (1 - e1 * e2), xi * e1 * (1 - e2))),
        ((xi, xi * e1), (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3))),
        ((xi * (1 - e1 * e2), xi * e1 * (1 - e2)), (xi, xi * e1 * e2 * e3)),
        ((xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), (xi, xi * e1)),
        ((xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)), (xi, xi * e1 * e2)),
    ]
    base = xi ** 3 * e1 ** 2
    jac = [base] + [base * e2] * 4
    return regions, jac


def _ss_vertex(xi, e1, e2, e3):
    regions = [
        ((xi, xi * e1), (xi * e2, xi * e2 * e3)),
        ((xi * e2, xi * e2 * e3), (xi, xi * e1)),
    ]
    jac = [xi ** 3 * e2] * 2
    return regions, jac


_SS = {"coincident": _ss_coincident, "edge": _ss_edge, "vertex": _ss_vertex}


def _to_bary(x1, x2):
    return np.stack([1.0 - x1, x1 - x2, x2], axis=-1)


def graded_nodes(order: int, grade: float, ratio: float = 4.0):
    """Composite Gauss rule on [0, 1] refined geometrically towards 0.

    Break points sit at ratio**k / grade below 1, so a factor exp(-grade t)
    is resolved on every sub-interval.
    """
    breaks = [0.0]
    b = 1.0 / grade if grade > 1.0 else 1.0
    while b < 1.0:
        breaks.append(b)
        b *= ratio
    breaks.append(1.0)
    x0, w0 = gauss_legendre01(order)
    xs, ws = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        xs.append(lo + (hi - lo) * x0)
        ws.append((hi - lo) * w0)
    return np.concatenate(xs), np.concatenate(ws)


# variables in which the separation r factors for each pair kind
_GRADED_VARS = {"coincident": (1, 2), "edge": (1,), "vertex": (0,)}


@lru_cache(maxsize=64)
def sauter_schwab_rule(kind: str, order: int, grade: float = 1.0):
    """Regularized Galerkin rule for a pair of triangles touching at a point set.

    Vertex ordering convention for the two triangles (P0, P1, P2):
    coincident pairs use the same ordering; edge pairs share P0 and P1;
    vertex pairs share P0.  The reference map is
    ``P0 + x1 (P1 - P0) + x2 (P2 - P1)``.

    ``grade`` > 1 refines the coordinate along which the separation of the
    two points scales, resolving kernels that decay like exp(-grade r / diam).

    Returns
    -------
    bary_a, bary_b : (N, 3) barycentric points on the two triangles
    weights : (N,) summing to 1/4; scale by (2 A_a)(2 A_b)
    """
    if kind not in _SS:
        raise ValueError(f"unknown singular pair kind {kind!r}")
    x, w = gauss_legendre01(order)
    axes = [(x, w)] * 4
    if grade > 1.0:
        for k in _GRADED_VARS[kind]:
            axes[k] = graded_nodes(order, grade)
    g = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wg = np.einsum("i,j,k,l->ijkl", *[a[1] for a in axes]).ravel()
    xi, e1, e2, e3 = (a.ravel() for a in g)
    regions, jac = _SS[kind](xi, e1, e2, e3)
    ba, bb, ww = [], [], []
    for ((xa1, xa2), (xb1, xb2)), j in zip(regions, jac):
        ba.append(_to_bary(xa1, xa2))
        bb.append(_to_bary(xb1, xb2))
        ww.append(wg * j)
    return (_frozen(np.vstack(ba)), _frozen(np.vstack(bb)),
            _frozen(np.concatenate(ww)))


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# Gauss-Kronrod 15/7 on [-1, 1] (QUADPACK qk15)
GK15_NODES = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
GK15_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
GK15_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])


def gk15(a: float, b: float):
    """Nodes on [a, b] with Kronrod and embedded Gauss weights.

    Returns
    -------
    x : (15,) nodes in increasing order
    wk : (15,) Kronrod weights
    wg : (15,) Gauss weights (zero on Kronrod-only nodes)
    """
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    t = np.concatenate([-GK15_NODES[:-1], GK15_NODES[::-1]])
    wk = np.concatenate([GK15_WK[:-1], GK15_WK[::-1]])
    gauss = np.zeros(8)
    gauss[1:7:2] = GK15_WG[:3]
    gauss[7] = GK15_WG[3]
    wg = np.concatenate([gauss[:-1], gauss[::-1]])
    return c + h * t, h * wk, h * wg
