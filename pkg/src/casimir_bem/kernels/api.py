"""Per-basis-function access to the Galerkin integrals.

These routines evaluate single RWG pairs through the same moment kernels
used by batched assembly, so they double as a test harness for it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend as _bk
from .panels import (
    DEFAULT_SETTINGS,
    PanelSet,
    QuadratureSettings,
    TouchingPairs,
    _reorder,
    select_rule,
    touching_moments,
)
from .rules import sauter_schwab_rule

FOUR_PI = 4.0 * np.pi


def scalar_kernel(r, kappa):
    """Return ``(g, dg/dr)`` for g(r) = exp(-kappa r) / (4 pi r).

    Parameters
    ----------
    r : float or array, r > 0
    kappa : float, kappa >= 0
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("scalar_kernel requires r > 0")
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    e = np.exp(-kappa * r)
    g = e / (FOUR_PI * r)
    dg = -(1.0 + kappa * r) * e / (FOUR_PI * r * r)
    if g.ndim == 0:
        return float(g), float(dg)
    return g, dg


@dataclass(frozen=True)
class PanelPairIntegrals:
    """A, Phi and C for one pair of basis functions."""

    A: float
    Phi: float
    C: float


def classify_pair(panels_a: PanelSet, ta: int, panels_b: PanelSet, tb: int) -> str:
    """'coincident', 'edge', 'vertex' or 'disjoint' for two triangles."""
    if panels_a is not panels_b:
        return "disjoint"
    shared = len(set(panels_a.mesh.triangles[ta]) & set(panels_b.mesh.triangles[tb]))
    return {3: "coincident", 2: "edge", 1: "vertex", 0: "disjoint"}[shared]


def triangle_pair_moments(pa: PanelSet, ta: int, pb: PanelSet, tb: int, kappa: float,
                          mode=_bk.FULL, axis=None,
                          settings: QuadratureSettings = DEFAULT_SETTINGS,
                          rule: int | None = None):
    """18 moments of one ordered triangle pair (see ``_fallback``)."""
    kind = classify_pair(pa, ta, pb, tb)
    ia, ib = np.array([ta]), np.array([tb])
    if kind == "disjoint":
        if rule is None:
            d = np.linalg.norm(pa.centroids[ta] - pb.centroids[tb])
            dm = max(pa.diameters[ta], pb.diameters[tb])
            rule = int(select_rule(np.array([d]), np.array([dm]), kappa, settings)[0])
            if rule == 0:
                return np.zeros(_bk.NMOM)
        pts_a, w_a = pa.rule_points(rule)
        pts_b, w_b = pb.rule_points(rule)
        return _bk.regular_moments(pts_a, w_a, pa.centroids, pts_b, w_b, pb.centroids,
                                   ia, ib, kappa, mode, axis)[0]
    if mode == _bk.DERIV:
        raise ValueError("derivatives are defined only between different bodies")
    nshared = {"coincident": 3, "edge": 2, "vertex": 1}[kind]
    tri = pa.mesh.triangles
    ra, rb = _reorder(tri[[ta]], tri[[tb]], nshared)
    ca, cb = pa.mesh.vertices[ra], pa.mesh.vertices[rb]
    tp = TouchingPairs(kind, ia, ib, ca, cb)
    ba, bb, w = sauter_schwab_rule(kind, settings.singular_order)
    scale = np.array([4.0 * pa.areas[ta] * pa.areas[tb]])
    static = _bk.singular_moments(ca, cb, pa.centroids[ia], pa.centroids[ib],
                                  ba, bb, w, scale, 0.0, _bk.STATIC)
    mom = touching_moments(pa, tp, kappa, static, settings)[0]
    if kind == "coincident":
        mom[8:] = 0.0
    return mom


def _local(p: PanelSet, alpha: int):
    b = p.basis
    out = []
    for t in (b.tplus[alpha], b.tminus[alpha]):
        k = int(np.nonzero(b.tri_basis[t] == alpha)[0][0])
        out.append((int(t), k))
    return out


def _combine_one(pa, ta, k, pb, tb, l, m):
    cc = pa.coef[ta, k] * pb.coef[tb, l]
    qa, qb = pa.q[ta, k], pb.q[tb, l]
    A = cc * (m[7] - qb @ m[1:4] - qa @ m[4:7] + (qa @ qb) * m[0])
    Phi = pa.div[ta, k] * pb.div[tb, l] * m[0]
    C = cc * (m[8] - qb @ m[9:12] - qa @ m[12:15] + np.cross(qb, qa) @ m[15:18])
    return A, Phi, C


def panel_pair(panels_a: PanelSet, alpha: int, panels_b: PanelSet, beta: int,
               kappa: float, settings: QuadratureSettings = DEFAULT_SETTINGS,
               rule: int | None = None) -> PanelPairIntegrals:
    """Galerkin integrals between basis ``alpha`` of a and ``beta`` of b.

    Passing the same ``PanelSet`` object for both sides marks the pair as
    belonging to one body, which enables the singular-pair treatment.
    """
    tot = np.zeros(3)
    for ta, k in _local(panels_a, alpha):
        for tb, l in _local(panels_b, beta):
            m = triangle_pair_moments(panels_a, ta, panels_b, tb, kappa,
                                      settings=settings, rule=rule)
            tot += _combine_one(panels_a, ta, k, panels_b, tb, l, m)
    return PanelPairIntegrals(*map(float, tot))


def panel_pair_derivative(panels_a: PanelSet, alpha: int, panels_b: PanelSet, beta: int,
                          kappa: float, axis,
                          settings: QuadratureSettings = DEFAULT_SETTINGS,
                          rule: int | None = None) -> PanelPairIntegrals:
    """Derivative of ``panel_pair`` under rigid translation of body b along ``axis``."""
    if panels_a is panels_b:
        raise ValueError("panel_pair_derivative needs panels on different bodies")
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    tot = np.zeros(3)
    for ta, k in _local(panels_a, alpha):
        for tb, l in _local(panels_b, beta):
            m = triangle_pair_moments(panels_a, ta, panels_b, tb, kappa, _bk.DERIV, ax,
                                      settings=settings, rule=rule)
            tot += _combine_one(panels_a, ta, k, panels_b, tb, l, m)
    return PanelPairIntegrals(*map(float, tot))
