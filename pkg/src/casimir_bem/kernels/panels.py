"""Panel data, pair classification, quadrature plans and block assembly.

A ``PanelSet`` holds the per-triangle geometry of one placed mesh together
with the local RWG data needed to turn triangle-pair moments into A, Phi and
C blocks.  The moment kernels themselves live in the selected backend.
"""
from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..mesh import SurfaceMesh, build_rwg_basis
from . import backend as _bk
from .rules import sauter_schwab_rule, triangle_rule


@dataclass(frozen=True)
class QuadratureSettings:
    """Distance-adaptive quadrature knobs.

    Ratios are centroid distance over the larger triangle diameter.
    """

    far_ratio: float = 10.0
    mid_ratio: float = 4.0
    near_ratio: float = 1.0
    far_points: int = 1
    mid_points: int = 3
    base_points: int = 7
    near_points: int = 13
    singular_order: int = 8
    remainder_order: int = 4
    full_order: int = 5
    full_threshold: float = 4.0
    skip_decay: float = 50.0
    escalate_decay: float = 20.0
    escalate: tuple = ((0.5, 7), (1.5, 13), (4.0, 52))
    # below kappa * size = lowfreq_kl the far rules are raised; the static
    # limit amplifies their error by 1 / (kappa h)^2 in penetrable bodies
    lowfreq_kl: float = 0.05
    lowfreq_far_points: int = 3
    lowfreq_mid_points: int = 7
    # integrands are evaluated no lower than kappa * size = min_kl
    min_kl: float = 1e-2

    def __post_init__(self):
        if not (self.far_ratio > self.mid_ratio > self.near_ratio > 0):
            raise ValueError("need far_ratio > mid_ratio > near_ratio > 0")
        for n in (self.far_points, self.mid_points, self.base_points, self.near_points):
            triangle_rule(n)
        if min(self.singular_order, self.remainder_order, self.full_order) < 2:
            raise ValueError("singular rule orders must be at least 2")
        triangle_rule(self.lowfreq_far_points)
        triangle_rule(self.lowfreq_mid_points)
        if not (0 <= self.min_kl <= self.lowfreq_kl):
            raise ValueError("need 0 <= min_kl <= lowfreq_kl")

    def for_kl(self, kl: float) -> "QuadratureSettings":
        """Settings to use when kappa times the geometry size is ``kl``."""
        if kl >= self.lowfreq_kl:
            return self
        return replace(self, far_points=max(self.far_points, self.lowfreq_far_points),
                       mid_points=max(self.mid_points, self.lowfreq_mid_points))


DEFAULT_SETTINGS = QuadratureSettings()


class PanelSet:
    """Triangles of one placed mesh plus local RWG coefficients."""

    def __init__(self, mesh: SurfaceMesh, basis=None):
        self.mesh = mesh
        self.basis = basis if basis is not None else build_rwg_basis(mesh)
        b = self.basis
        self.corners = np.ascontiguousarray(mesh.corners)
        self.centroids = np.ascontiguousarray(mesh.centroids)
        self.areas = mesh.areas
        self.diameters = mesh.diameters
        self.n_basis = b.size
        length = b.length[b.tri_basis]
        self.coef = b.tri_sign * length / (2.0 * self.areas[:, None])
        self.div = b.tri_sign * length / self.areas[:, None]
        # local basis k has its free vertex at corner k
        self.q = self.corners - self.centroids[:, None, :]
        self._rules = {}
        self._lock = threading.Lock()

    @property
    def n_triangles(self) -> int:
        return len(self.areas)

    def rule_points(self, n: int):
        """Physical points (F, n, 3) and area-scaled weights (F, n)."""
        with self._lock:
            r = self._rules.get(n)
            if r is None:
                bary, w = triangle_rule(n)
                pts = np.ascontiguousarray(np.einsum("nk,fkj->fnj", bary, self.corners))
                wts = np.ascontiguousarray(self.areas[:, None] * w[None, :])
                r = self._rules[n] = (pts, wts)
        return r

    @cached_property
    def bbox(self):
        v = self.mesh.vertices
        return v.min(axis=0), v.max(axis=0)


# --------------------------------------------------------------------------
# Touching pairs inside one mesh

@dataclass
class TouchingPairs:
    kind: str
    ta: np.ndarray
    tb: np.ndarray
    corn_a: np.ndarray      # reordered for the singular rule
    corn_b: np.ndarray


def touching_pairs(mesh: SurfaceMesh):
    """Classify triangle pairs (ta <= tb) that share at least one vertex."""
    F, V = mesh.n_triangles, mesh.n_vertices
    tri = mesh.triangles
    inc = sp.csr_matrix((np.ones(3 * F), (np.repeat(np.arange(F), 3), tri.ravel())),
                        shape=(F, V))
    share = sp.triu(inc @ inc.T).tocoo()
    ta, tb, cnt = share.row, share.col, share.data.astype(int)
    out = {}
    for kind, c in (("coincident", 3), ("edge", 2), ("vertex", 1)):
        m = cnt == c
        a, b = ta[m].astype(np.int64), tb[m].astype(np.int64)
        order = np.lexsort((b, a))
        a, b = a[order], b[order]
        ia, ib = _reorder(tri[a], tri[b], c)
        ca = mesh.vertices[ia]
        cb = mesh.vertices[ib]
        out[kind] = TouchingPairs(kind, a, b, ca, cb)
    return out


def _reorder(va, vb, nshared):
    """Vertex orderings with shared vertices first and in the same order."""
    if nshared == 3:
        return va, va.copy()
    P = len(va)
    ra = np.empty_like(va)
    rb = np.empty_like(vb)
    for p in range(P):
        a, b = list(va[p]), list(vb[p])
        shared = [x for x in a if x in b]
        ra[p] = shared + [x for x in a if x not in shared]
        rb[p] = shared + [x for x in b if x not in shared]
    return ra, rb


class _LRU:
    def __init__(self, maxsize):
        self.maxsize = maxsize
        self.data = OrderedDict()
        self.lock = threading.Lock()

    def get(self, key):
        with self.lock:
            v = self.data.get(key)
            if v is not None:
                self.data.move_to_end(key)
            return v

    def put(self, key, value):
        with self.lock:
            self.data[key] = value
            self.data.move_to_end(key)
            while len(self.data) > self.maxsize:
                self.data.popitem(last=False)

    def clear(self):
        with self.lock:
            self.data.clear()


_static_cache = _LRU(16)


def static_singular(panels: PanelSet, settings: QuadratureSettings = DEFAULT_SETTINGS):
    """Touching pairs and their kappa-independent static moments (cached)."""
    key = (panels.mesh.content_key, settings.singular_order)
    hit = _static_cache.get(key)
    if hit is not None:
        return hit
    pairs = touching_pairs(panels.mesh)
    moms = {}
    for kind, tp in pairs.items():
        ba, bb, w = sauter_schwab_rule(kind, settings.singular_order)
        scale = 4.0 * panels.areas[tp.ta] * panels.areas[tp.tb]
        moms[kind] = _bk.singular_moments(
            tp.corn_a, tp.corn_b, panels.centroids[tp.ta], panels.centroids[tp.tb],
            ba, bb, w, scale, 0.0, _bk.STATIC)
    res = (pairs, moms)
    _static_cache.put(key, res)
    return res


# --------------------------------------------------------------------------
# Plans for non-touching pairs

@dataclass
class PairPlan:
    """Triangle pairs grouped by tensor rule size."""

    groups: dict            # n -> (ia, ib)

    @property
    def n_pairs(self) -> int:
        return sum(len(a) for a, _ in self.groups.values())


def select_rule(dist, dmax, kappa, s: QuadratureSettings = DEFAULT_SETTINGS):
    """Tensor rule size per pair from centroid distance and diameter; 0 = skip."""
    ratio = dist / dmax
    n = np.full(np.shape(dist), s.base_points, dtype=np.int64)
    n[ratio > s.mid_ratio] = s.mid_points
    n[ratio > s.far_ratio] = s.far_points
    n[ratio <= s.near_ratio] = s.near_points
    if kappa > 0:
        kg = kappa * np.maximum(dist - dmax, 0.0)
        live = kg < s.escalate_decay
        kd = kappa * dmax
        for thr, npts in s.escalate:
            n = np.where(live & (kd > thr), np.maximum(n, npts), n)
        n[kg > s.skip_decay] = 0
    return n


def make_plan(pa: PanelSet, pb: PanelSet, kappa: float, same: bool,
              settings: QuadratureSettings = DEFAULT_SETTINGS) -> PairPlan:
    """Choose a tensor rule for every non-touching triangle pair.

    For ``same`` the pair list is restricted to ta < tb and excludes pairs
    sharing a vertex.
    """
    s = settings
    Fa, Fb = pa.n_triangles, pb.n_triangles
    groups = {}
    block = max(1, 4_000_000 // max(Fb, 1))
    for r0 in range(0, Fa, block):
        rows = np.arange(r0, min(Fa, r0 + block))
        d = np.linalg.norm(pa.centroids[rows, None, :] - pb.centroids[None, :, :], axis=2)
        dm = np.maximum(pa.diameters[rows, None], pb.diameters[None, :])
        n = select_rule(d, dm, kappa, s)
        if same:
            cols = np.arange(Fb)
            n[cols[None, :] <= rows[:, None]] = 0
        ia, ib = np.nonzero(n)
        nn = n[ia, ib]
        ia = ia + r0
        if same:
            keep = ~_touch_mask(pa.mesh, ia, ib)
            ia, ib, nn = ia[keep], ib[keep], nn[keep]
        for k in np.unique(nn):
            m = nn == k
            a0, b0 = groups.get(int(k), (np.empty(0, np.int64), np.empty(0, np.int64)))
            groups[int(k)] = (np.concatenate([a0, ia[m]]), np.concatenate([b0, ib[m]]))
    return PairPlan(groups)


def _touch_mask(mesh, ia, ib):
    tri = mesh.triangles
    a, b = tri[ia], tri[ib]
    return (a[:, :, None] == b[:, None, :]).any(axis=(1, 2))


# --------------------------------------------------------------------------
# Moments -> blocks

def combine(pa: PanelSet, pb: PanelSet, ta, tb, mom, out_A, out_P, out_C,
            transpose_add: bool = False):
    """Accumulate triangle-pair moments into dense A, Phi and C blocks.

    With ``transpose_add`` the symmetric partner (tb, ta) is added as well,
    which is how self blocks are filled from the ta < tb half.
    """
    if len(ta) == 0:
        return
    Na, Nb = out_A.shape
    step = 1 << 16
    for s in range(0, len(ta), step):
        a, b, m = ta[s:s + step], tb[s:s + step], mom[s:s + step]
        qa, qb = pa.q[a], pb.q[b]                       # (P, 3, 3)
        cc = pa.coef[a][:, :, None] * pb.coef[b][:, None, :]
        dd = pa.div[a][:, :, None] * pb.div[b][:, None, :]
        m0, mu, mup, muu = m[:, 0], m[:, 1:4], m[:, 4:7], m[:, 7]
        qa_mup = np.einsum("pki,pi->pk", qa, mup)
        qb_mu = np.einsum("pli,pi->pl", qb, mu)
        qq = np.einsum("pki,pli->pkl", qa, qb)
        A = cc * (muu[:, None, None] - qb_mu[:, None, :] - qa_mup[:, :, None]
                  + qq * m0[:, None, None])
        Ph = dd * m0[:, None, None]
        c0, V1, V2, V3 = m[:, 8], m[:, 9:12], m[:, 12:15], m[:, 15:18]
        qb_V1 = np.einsum("pli,pi->pl", qb, V1)
        qa_V2 = np.einsum("pki,pi->pk", qa, V2)
        # (q_b x q_a) . V3 = q_a . (V3 x q_b)
        v3xqb = np.cross(V3[:, None, :], qb)
        trip = np.einsum("pki,pli->pkl", qa, v3xqb)
        C = cc * (c0[:, None, None] - qb_V1[:, None, :] - qa_V2[:, :, None] + trip)
        rows = pa.basis.tri_basis[a][:, :, None]
        cols = pb.basis.tri_basis[b][:, None, :]
        flat = (rows * Nb + cols).ravel()
        _scatter(out_A, flat, A)
        _scatter(out_P, flat, Ph)
        _scatter(out_C, flat, C)
        if transpose_add:
            flat_t = (cols * Na + rows).ravel()
            _scatter(out_A, flat_t, A)
            _scatter(out_P, flat_t, Ph)
            _scatter(out_C, flat_t, C)


def _scatter(out, flat, vals):
    out.ravel()[:] += np.bincount(flat, weights=vals.ravel(), minlength=out.size)


# --------------------------------------------------------------------------
# Block builders

@dataclass
class Blocks:
    """A, Phi, C for one body pair and one medium wavenumber."""

    A: np.ndarray
    Phi: np.ndarray
    C: np.ndarray


def _regular(pa, pb, plan, kappa, mode, axis=None):
    out = []
    for n, (ia, ib) in sorted(plan.groups.items()):
        if len(ia) == 0:
            continue
        pts_a, w_a = pa.rule_points(n)
        pts_b, w_b = pb.rule_points(n)
        m = _bk.regular_moments(pts_a, w_a, pa.centroids, pts_b, w_b, pb.centroids,
                                ia, ib, kappa, mode, axis)
        out.append((ia, ib, m))
    return out


def touching_moments(panels: PanelSet, tp: TouchingPairs, kappa: float, static,
                     settings: QuadratureSettings = DEFAULT_SETTINGS):
    """Moments of touching pairs at wavenumber ``kappa``.

    Small kappa*diam: cached static part plus the bounded remainder on a
    low-order regularized rule.  Large kappa*diam: the full kernel on a rule
    graded towards the singular set.
    """
    mom = np.array(static, copy=True)
    if kappa <= 0 or len(tp.ta) == 0:
        return mom
    dmax = np.maximum(panels.diameters[tp.ta], panels.diameters[tp.tb])
    kd = kappa * dmax
    cen_a, cen_b = panels.centroids[tp.ta], panels.centroids[tp.tb]
    scale = 4.0 * panels.areas[tp.ta] * panels.areas[tp.tb]
    small = kd <= settings.full_threshold
    if np.any(small):
        i = np.nonzero(small)[0]
        ba, bb, w = sauter_schwab_rule(tp.kind, settings.remainder_order)
        mom[i] += _bk.singular_moments(tp.corn_a[i], tp.corn_b[i], cen_a[i], cen_b[i],
                                       ba, bb, w, scale[i], kappa, _bk.REMAINDER)
    if not np.all(small):
        # one graded rule per octave of kappa*diam keeps the rule cache small
        big = np.nonzero(~small)[0]
        grade = 2.0 ** np.ceil(np.log2(kd[big]))
        for gval in np.unique(grade):
            i = big[grade == gval]
            ba, bb, w = sauter_schwab_rule(tp.kind, settings.full_order, float(gval))
            mom[i] = _bk.singular_moments(tp.corn_a[i], tp.corn_b[i], cen_a[i], cen_b[i],
                                          ba, bb, w, scale[i], kappa, _bk.FULL)
    return mom


def self_blocks(panels: PanelSet, kappa: float,
                settings: QuadratureSettings = DEFAULT_SETTINGS) -> Blocks:
    """Same-body blocks; invariant under rigid motion of the mesh."""
    N = panels.n_basis
    A = np.zeros((N, N))
    Ph = np.zeros((N, N))
    C = np.zeros((N, N))
    pairs, static = static_singular(panels, settings)
    for kind, tp in pairs.items():
        if len(tp.ta) == 0:
            continue
        mom = touching_moments(panels, tp, kappa, static[kind], settings)
        if kind == "coincident":
            mom[:, 8:] = 0.0
            combine(panels, panels, tp.ta, tp.tb, mom, A, Ph, C)
        else:
            combine(panels, panels, tp.ta, tp.tb, mom, A, Ph, C, transpose_add=True)
    plan = make_plan(panels, panels, kappa, True, settings)
    for ia, ib, m in _regular(panels, panels, plan, kappa, _bk.FULL):
        combine(panels, panels, ia, ib, m, A, Ph, C, transpose_add=True)
    return Blocks(A, Ph, C)


def cross_blocks(pa: PanelSet, pb: PanelSet, kappa: float, plan: PairPlan | None = None,
                 settings: QuadratureSettings = DEFAULT_SETTINGS) -> Blocks:
    """Blocks between two different bodies (source panels ``pb``)."""
    if plan is None:
        plan = make_plan(pa, pb, kappa, False, settings)
    A = np.zeros((pa.n_basis, pb.n_basis))
    Ph = np.zeros_like(A)
    C = np.zeros_like(A)
    for ia, ib, m in _regular(pa, pb, plan, kappa, _bk.FULL):
        combine(pa, pb, ia, ib, m, A, Ph, C)
    return Blocks(A, Ph, C)


def cross_derivative_blocks(pa: PanelSet, pb: PanelSet, kappa: float, axis,
                            plan: PairPlan | None = None,
                            settings: QuadratureSettings = DEFAULT_SETTINGS) -> Blocks:
    """Derivative of ``cross_blocks`` under translation of body ``pb`` along ``axis``."""
    if plan is None:
        plan = make_plan(pa, pb, kappa, False, settings)
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    A = np.zeros((pa.n_basis, pb.n_basis))
    Ph = np.zeros_like(A)
    C = np.zeros_like(A)
    for ia, ib, m in _regular(pa, pb, plan, kappa, _bk.DERIV, ax):
        combine(pa, pb, ia, ib, m, A, Ph, C)
    return Blocks(A, Ph, C)
