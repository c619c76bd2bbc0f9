"""Rigid transforms and surface-surface proximity queries."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .mesh import SurfaceMesh


def rotation_matrix(axis, angle_deg: float) -> np.ndarray:
    """Proper rotation about ``axis`` by ``angle_deg`` degrees."""
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0:
        if angle_deg == 0:
            return np.eye(3)
        raise ValueError("rotation axis must be non-zero")
    return Rotation.from_rotvec(np.deg2rad(angle_deg) * axis / n).as_matrix()


def _point_triangle_dist(p, a, b, c):
    """Distance from points p to triangles (a, b, c), all (K, 3)."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ki,ki->k", ab, ap)
    d2 = np.einsum("ki,ki->k", ac, ap)
    bp = p - b
    d3 = np.einsum("ki,ki->k", ab, bp)
    d4 = np.einsum("ki,ki->k", ac, bp)
    cp = p - c
    d5 = np.einsum("ki,ki->k", ab, cp)
    d6 = np.einsum("ki,ki->k", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        q = a + v[:, None] * ab + w[:, None] * ac
        # edge regions (Ericson, Real-Time Collision Detection, 5.1.5)
        t_ab = np.clip(d1 / (d1 - d3), 0, 1)
        t_ac = np.clip(d2 / (d2 - d6), 0, 1)
        t_bc = np.clip((d4 - d3) / ((d4 - d3) + (d5 - d6)), 0, 1)
    cand = [q,
            a + np.nan_to_num(t_ab)[:, None] * ab,
            a + np.nan_to_num(t_ac)[:, None] * ac,
            b + np.nan_to_num(t_bc)[:, None] * (c - b),
            a, b, c]
    inside = (va >= 0) & (vb >= 0) & (vc >= 0) & (denom > 0)
    dist = np.full(len(p), np.inf)
    for k, x in enumerate(cand):
        d = np.linalg.norm(p - x, axis=1)
        if k == 0:
            d = np.where(inside, d, np.inf)
        dist = np.minimum(dist, d)
    return dist


def _segment_segment_dist(p1, q1, p2, q2):
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a = np.einsum("ki,ki->k", d1, d1)
    e = np.einsum("ki,ki->k", d2, d2)
    f = np.einsum("ki,ki->k", d2, r)
    c = np.einsum("ki,ki->k", d1, r)
    b = np.einsum("ki,ki->k", d1, d2)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-300 * np.maximum(a * e, 1e-300),
                     np.clip((b * f - c * e) / denom, 0, 1), 0.0)
        t = (b * s + f) / e
        s = np.where(t < 0, np.clip(-c / a, 0, 1), np.where(t > 1, np.clip((b - c) / a, 0, 1), s))
        t = np.clip(t, 0, 1)
    c1 = p1 + s[:, None] * d1
    c2 = p2 + t[:, None] * d2
    return np.linalg.norm(c1 - c2, axis=1)


def _segment_hits_triangle(p, q, a, b, c):
    """True where the closed segment pq crosses triangle abc."""
    d = q - p
    e1, e2 = b - a, c - a
    n = np.cross(e1, e2)
    # the endpoints must straddle (or touch) the plane of the triangle
    sp = np.einsum("ki,ki->k", n, p - a)
    sq = np.einsum("ki,ki->k", n, q - a)
    h = np.cross(d, e2)
    det = np.einsum("ki,ki->k", e1, h)
    scale = np.linalg.norm(d, axis=1) * np.linalg.norm(n, axis=1)
    ok = (np.abs(det) > 1e-12 * scale) & (sp * sq <= 0)
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = p - a
    u = inv * np.einsum("ki,ki->k", s, h)
    qv = np.cross(s, e1)
    v = inv * np.einsum("ki,ki->k", d, qv)
    t = inv * np.einsum("ki,ki->k", e2, qv)
    return ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t >= 0) & (t <= 1)


def triangle_pair_distance(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Exact distance between triangle pairs A[k], B[k] (K, 3, 3); 0 if they cross."""
    K = len(A)
    d = np.full(K, np.inf)
    for i in range(3):
        d = np.minimum(d, _point_triangle_dist(A[:, i], B[:, 0], B[:, 1], B[:, 2]))
        d = np.minimum(d, _point_triangle_dist(B[:, i], A[:, 0], A[:, 1], A[:, 2]))
        for j in range(3):
            d = np.minimum(d, _segment_segment_dist(A[:, i], A[:, (i + 1) % 3],
                                                    B[:, j], B[:, (j + 1) % 3]))
    hit = np.zeros(K, dtype=bool)
    for i in range(3):
        hit |= _segment_hits_triangle(A[:, i], A[:, (i + 1) % 3], B[:, 0], B[:, 1], B[:, 2])
        hit |= _segment_hits_triangle(B[:, i], B[:, (i + 1) % 3], A[:, 0], A[:, 1], A[:, 2])
    return np.where(hit, 0.0, d)


def surface_distance(m1: SurfaceMesh, m2: SurfaceMesh) -> float:
    """Minimum distance between two triangulated surfaces (0 if they cross).

    Brute force over triangle pairs, pruned by bounding spheres against
    an upper bound from the closest vertex pair.
    """
    ub = float(cKDTree(m2.vertices).query(m1.vertices, k=1)[0].min())
    c1, c2 = m1.centroids, m2.centroids
    r1 = np.linalg.norm(m1.corners - c1[:, None], axis=2).max(1)
    r2 = np.linalg.norm(m2.corners - c2[:, None], axis=2).max(1)
    tree = cKDTree(c2)
    best = ub
    reach = ub + r1 + r2.max()
    for i, js in enumerate(tree.query_ball_point(c1, reach)):
        if not js:
            continue
        js = np.asarray(js)
        lb = np.linalg.norm(c2[js] - c1[i], axis=1) - r1[i] - r2[js]
        js = js[lb <= best]
        if len(js) == 0:
            continue
        d = triangle_pair_distance(np.repeat(m1.corners[i:i + 1], len(js), 0), m2.corners[js])
        best = min(best, float(d.min()))
        if best == 0.0:
            return 0.0
    return best


def winding_number(mesh: SurfaceMesh, point) -> float:
    """Generalized winding number of a closed mesh about ``point`` (1 inside)."""
    c = mesh.corners - np.asarray(point, dtype=float)
    a, b, cc = c[:, 0], c[:, 1], c[:, 2]
    la, lb, lc = (np.linalg.norm(x, axis=1) for x in (a, b, cc))
    num = np.einsum("ki,ki->k", a, np.cross(b, cc))
    den = (la * lb * lc + np.einsum("ki,ki->k", a, b) * lc
           + np.einsum("ki,ki->k", b, cc) * la + np.einsum("ki,ki->k", cc, a) * lb)
    return float(2.0 * np.arctan2(num, den).sum() / (4.0 * np.pi))


def contains(outer: SurfaceMesh, inner: SurfaceMesh) -> bool:
    """True if a vertex of ``inner`` lies inside ``outer``."""
    return abs(winding_number(outer, inner.vertices[0])) > 0.5
