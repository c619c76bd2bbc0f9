"""Imaginary-frequency integration of the energy and force integrands.

Energies are in units of hbar c / um and forces in hbar c / um^2 (lengths
in um, hbar = c = 1 internally).
"""
from __future__ import annotations

import heapq
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .assembly import (
    AssemblyOptions,
    Geometry,
    PlanCache,
    assemble_dM,
    assemble_M,
    assemble_Minf,
    medium_params,
    transparent_bodies,
)
from .errors import NumericalError
from .kernels.rules import gk15
from .spectral import Factorization, force_trace, log_det_ratio

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass
class XiQuadrature:
    """Settings and sample record for one xi integral.

    Attributes
    ----------
    xi0 : float or None
        Scale of the map xi = xi0 u / (1 - u). ``None`` lets the drivers
        pick 1 / (minimum surface gap).
    rtol, atol : float
        Stop when the summed error estimate is below max(atol, rtol |I|).
    max_evals : int
        Budget of integrand evaluations.
    workers : int
        Threads used to evaluate the nodes of each refinement step.
    samples : list
        Filled by :func:`integrate_xi` with ``(xi, value)`` pairs in
        evaluation order.
    """

    xi0: float | None = None
    rtol: float = 1e-3
    atol: float = 0.0
    max_evals: int = 200
    workers: int = 1
    samples: list = field(default_factory=list)

    def __post_init__(self):
        if self.xi0 is not None and not (self.xi0 > 0 and math.isfinite(self.xi0)):
            raise ValueError(f"xi0 must be positive, got {self.xi0}")
        if not self.rtol >= 0 or not self.atol >= 0:
            raise ValueError("tolerances must be non-negative")
        if self.max_evals < 15:
            raise ValueError("max_evals must allow at least one 15-point panel")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def with_xi0(self, xi0: float) -> "XiQuadrature":
        return XiQuadrature(xi0, self.rtol, self.atol, self.max_evals, self.workers)


@dataclass
class QuadResult:
    value: np.ndarray | float
    error: float
    converged: bool
    n_evals: int
    samples: list


def _panel(a, b, vals):
    x, wk, wg = gk15(a, b)
    K = np.tensordot(wk, vals, axes=1)
    G = np.tensordot(wg, vals, axes=1)
    return K, float(np.max(np.abs(K - G))) if np.size(K) else 0.0


def integrate_xi(integrand: Callable, quad: XiQuadrature, xi0: float | None = None) -> QuadResult:
    """Adaptive Gauss-Kronrod integral of ``integrand`` over xi in (0, inf).

    The integrand may return a scalar or a fixed-length vector; vector
    components share nodes and the error estimate is the max-norm. The
    interval with the largest error is bisected until the total error meets
    the tolerance or the evaluation budget runs out (``converged`` False).
    Refinement order does not depend on ``quad.workers``.
    """
    xi0 = xi0 if xi0 is not None else quad.xi0
    if xi0 is None or not xi0 > 0:
        raise ValueError("integrate_xi needs a positive xi0")

    samples = quad.samples

    def eval_panel_set(intervals):
        nodes = [gk15(a, b)[0] for a, b in intervals]
        u = np.concatenate(nodes)
        xi = xi0 * u / (1.0 - u)
        jac = xi0 / (1.0 - u) ** 2
        if quad.workers > 1 and len(xi) > 1:
            with ThreadPoolExecutor(quad.workers) as ex:
                vals = list(ex.map(integrand, xi))
        else:
            vals = [integrand(x) for x in xi]
        out = []
        for x, v in zip(xi, vals):
            v = np.asarray(v, dtype=float)
            if not np.all(np.isfinite(v)):
                raise NumericalError(f"integrand is not finite at xi={x:.6g}")
            samples.append((float(x), v.copy() if v.ndim else float(v)))
        V = np.array([np.asarray(v, dtype=float) for v in vals])
        V = V * jac.reshape((-1,) + (1,) * (V.ndim - 1))
        res = []
        for k, (a, b) in enumerate(intervals):
            K, e = _panel(a, b, V[15 * k:15 * (k + 1)])
            res.append((a, b, K, e))
        return res

    n_evals = 15
    first = eval_panel_set([(0.0, 1.0)])
    heap = []          # (-err, a, b)
    store = {}
    for a, b, K, e in first:
        heapq.heappush(heap, (-e, a, b))
        store[(a, b)] = (K, e)

    def totals():
        keys = sorted(store)
        I = sum((store[k][0] for k in keys), np.zeros_like(store[keys[0]][0]))
        E = sum(store[k][1] for k in keys)
        return I, E

    I, E = totals()
    while E > max(quad.atol, quad.rtol * float(np.max(np.abs(I)))):
        if n_evals + 30 > quad.max_evals:
            log.warning("xi budget exhausted: err %.3g after %d evals", E, n_evals)
            return QuadResult(_scalar(I), E, False, n_evals, samples)
        _, a, b = heapq.heappop(heap)
        del store[(a, b)]
        m = 0.5 * (a + b)
        for a2, b2, K, e in eval_panel_set([(a, m), (m, b)]):
            store[(a2, b2)] = (K, e)
            heapq.heappush(heap, (-e, a2, b2))
        n_evals += 30
        I, E = totals()
    return QuadResult(_scalar(I), E, True, n_evals, samples)


def _scalar(I):
    I = np.asarray(I)
    return float(I) if I.ndim == 0 else I


# --------------------------------------------------------------------------
# integrands


@dataclass
class IntegrandSample:
    xi: float
    value: float
    logdet_M: float = float("nan")
    logdet_Minf: float = float("nan")


def _active(geometry: Geometry, xi: float):
    """Bodies that scatter at ``xi``; transparent ones decouple exactly."""
    gone = set(transparent_bodies(geometry, xi))
    keep = [i for i in range(len(geometry.bodies)) if i not in gone]
    return keep


def effective_xi(geometry: Geometry, xi: float, settings) -> float:
    """Frequency actually assembled for a requested ``xi``.

    Below kappa * size = ``settings.min_kl`` the integrands have reached
    their static limit while the discretized operators lose accuracy
    (low-frequency breakdown), so the value at that floor is used.
    """
    kl = medium_params(geometry.medium, xi).kappa(xi) * geometry.size
    if kl >= settings.min_kl or kl <= 0:
        return float(xi)
    return float(xi) * settings.min_kl / kl


def _decoupled(geometry: Geometry, kappa: float, settings) -> bool:
    # every cross pair lies beyond the quadrature skip range
    return len(geometry.bodies) > 1 and kappa * geometry.min_gap > settings.skip_decay


def _subset(geometry: Geometry, keep) -> Geometry:
    if len(keep) == len(geometry.bodies):
        return geometry
    return Geometry(tuple(geometry.bodies[i] for i in keep), geometry.medium, check=False)


def energy_integrand(geometry: Geometry, xi: float, opts: AssemblyOptions | None = None,
                     record_logdets: bool = False) -> IntegrandSample:
    """log det M(xi) - log det Minf(xi) with its two parts when available.

    Bodies whose response equals the medium's are removed first, since they
    do not scatter. When every cross pair is beyond the quadrature skip range
    the difference is exactly zero and no assembly is done unless
    ``record_logdets`` asks for the individual log-determinants.
    """
    opts = opts or AssemblyOptions()
    req, xi = float(xi), effective_xi(geometry, xi, opts.settings)
    keep = _active(geometry, xi)
    if not keep:
        return IntegrandSample(req, 0.0, 0.0, 0.0)
    sub = _subset(geometry, keep)
    kappa = medium_params(geometry.medium, xi).kappa(xi)
    trivial = len(keep) < 2 or _decoupled(sub, kappa, opts.settings)
    if trivial and not record_logdets:
        return IntegrandSample(req, 0.0)
    Minf = assemble_Minf(sub, xi, opts)
    factors = [Factorization.of(Minf.matrix[s, s])
               for s in (Minf.body_slice(b) for b in range(len(keep)))]
    ld_inf = float(sum(f.logabsdet for f in factors))
    if trivial:
        return IntegrandSample(req, 0.0, ld_inf, ld_inf)
    M = assemble_M(sub, xi, opts)
    diff = log_det_ratio(M, Minf, factors)
    return IntegrandSample(req, diff, ld_inf + diff, ld_inf)


def force_integrand(geometry: Geometry, xi: float, body_index: int, axis,
                    opts: AssemblyOptions | None = None, symmetric: bool = True) -> float:
    """Tr(M^{-1} dM/dx) for rigid translation of one body along ``axis``."""
    opts = opts or AssemblyOptions()
    xi = effective_xi(geometry, xi, opts.settings)
    keep = _active(geometry, xi)
    if body_index not in keep or len(keep) < 2:
        return 0.0
    sub = _subset(geometry, keep)
    kappa = medium_params(geometry.medium, xi).kappa(xi)
    if _decoupled(sub, kappa, opts.settings):
        return 0.0
    j = keep.index(body_index)
    M = assemble_M(sub, xi, opts)
    dM = assemble_dM(sub, xi, j, axis, opts)
    return force_trace(M, dM, symmetric=symmetric)


# --------------------------------------------------------------------------
# drivers


@dataclass
class CasimirResult:
    """Outcome of one xi integral.

    ``value`` is the energy (hbar c / um) or force component
    (hbar c / um^2); positive forces point along the requested axis.
    """

    quantity: str
    value: float
    error: float
    converged: bool
    n_evals: int
    xi0: float
    samples: list = field(default_factory=list)

    @property
    def units(self) -> str:
        return {"energy": "hbar*c/um", "force": "hbar*c/um^2"}.get(self.quantity, "")


def default_xi0(geometry: Geometry) -> float:
    """1 / minimum surface gap, or 1 / size for a single body."""
    if len(geometry.bodies) > 1:
        return 1.0 / geometry.min_gap
    ext = np.ptp(geometry.bodies[0].placed_mesh.vertices, axis=0).max()
    return 1.0 / ext


def _prep(geometry: Geometry, quad: XiQuadrature | None, opts):
    quad = quad or XiQuadrature()
    opts = opts or AssemblyOptions(plans=PlanCache())
    if opts.plans is None:
        opts = AssemblyOptions(opts.settings, opts.sign, PlanCache(), opts.cache)
    xi0 = quad.xi0 or default_xi0(geometry)
    return quad.with_xi0(xi0), opts, xi0


def casimir_energy(geometry: Geometry, quad: XiQuadrature | None = None,
                   opts: AssemblyOptions | None = None,
                   record_logdets: bool = False) -> CasimirResult:
    """Casimir energy (1 / 2 pi) int [log det M - log det Minf] dxi.

    Samples are :class:`IntegrandSample` records. A geometry with one
    body gives exactly zero without any assembly.
    """
    if len(geometry.bodies) < 2 and not record_logdets:
        return CasimirResult("energy", 0.0, 0.0, True, 0, default_xi0(geometry), [])
    quad, opts, xi0 = _prep(geometry, quad, opts)
    recs = {}

    def f(xi):
        s = energy_integrand(geometry, xi, opts, record_logdets)
        recs[s.xi] = s
        return s.value

    r = integrate_xi(f, quad)
    samples = [recs[x] for x, _ in r.samples]
    return CasimirResult("energy", r.value / TWO_PI, r.error / TWO_PI, r.converged,
                         r.n_evals, xi0, samples)


def casimir_energies(geometries: Sequence[Geometry], quad: XiQuadrature | None = None,
                     opts: AssemblyOptions | None = None) -> list:
    """Energies of several geometries on one shared set of xi nodes.

    Sharing nodes (and the cross-body rule plans in ``opts``) makes
    differences between nearby geometries free of quadrature noise. The
    common xi0 is taken from the smallest gap.
    """
    geometries = list(geometries)
    quad = quad or XiQuadrature()
    xi0 = quad.xi0 or max(default_xi0(g) for g in geometries)
    quad = quad.with_xi0(xi0)
    opts = opts or AssemblyOptions(plans=PlanCache())

    def f(xi):
        return np.array([energy_integrand(g, xi, opts).value for g in geometries])

    r = integrate_xi(f, quad)
    val = np.atleast_1d(r.value)
    return [CasimirResult("energy", float(v) / TWO_PI, r.error / TWO_PI, r.converged,
                          r.n_evals, xi0, [(x, float(s[k])) for x, s in r.samples])
            for k, v in enumerate(val)]


def casimir_force(geometry: Geometry, body_index: int, axis=(0.0, 0.0, 1.0),
                  quad: XiQuadrature | None = None, opts: AssemblyOptions | None = None,
                  symmetric: bool = True) -> CasimirResult:
    """Force -(1 / 2 pi) int Tr(M^{-1} dM/dx) dxi on one body along ``axis``."""
    if len(geometry.bodies) < 2:
        raise ValueError("casimir_force needs at least two bodies")
    if not 0 <= body_index < len(geometry.bodies):
        raise IndexError(f"body index {body_index} out of range")
    ax = np.asarray(axis, dtype=float)
    if ax.shape != (3,) or not np.linalg.norm(ax) > 0:
        raise ValueError("axis must be a non-zero 3-vector")
    ax = ax / np.linalg.norm(ax)
    quad, opts, xi0 = _prep(geometry, quad, opts)
    r = integrate_xi(lambda xi: force_integrand(geometry, xi, body_index, ax, opts, symmetric),
                     quad)
    return CasimirResult("force", -r.value / TWO_PI, r.error / TWO_PI, r.converged,
                         r.n_evals, xi0, list(r.samples))
