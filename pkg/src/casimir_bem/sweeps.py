"""Separation sweeps and two-angle rotational energy landscapes."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .assembly import AssemblyOptions, Geometry
from .errors import CasimirError, GeometryError
from .quadrature import (
    TWO_PI,
    XiQuadrature,
    casimir_force,
    default_xi0,
    energy_integrand,
    integrate_xi,
)
from .reference import PfaDescriptor, lifshitz_pfa_force, pfa_force

log = logging.getLogger(__name__)

NORMALIZATIONS = ("none", "pfa", "lifshitz-pfa")


def _body_index(geometry: Geometry, body) -> int:
    if isinstance(body, str):
        labels = [b.label for b in geometry.bodies]
        if body not in labels:
            raise GeometryError(f"no body labelled {body!r}; have {labels}")
        return labels.index(body)
    if not 0 <= int(body) < len(geometry.bodies):
        raise GeometryError(f"body index {body} out of range")
    return int(body)


@dataclass
class SweepPlan:
    """A rigid translation sweep of one body.

    Parameters
    ----------
    geometry : Geometry
        Base configuration.
    moving : str or int
        Label or index of the translated body.  ``axis`` should point away
        from the other bodies so that larger grid values mean larger gaps.
    grid : sequence of float
        Surface gaps d (``parameter='gap'``) or centroid separations S
        (``parameter='separation'``), in um.
    normalization : {'none', 'pfa', 'lifshitz-pfa'}
        Reference force for the ratio column; needs ``pfa``.
    pfa : PfaDescriptor, optional
        Geometry class for the reference; its gap is replaced per point.
    """

    geometry: Geometry
    moving: str | int
    grid: Sequence[float]
    axis: tuple = (0.0, 0.0, 1.0)
    parameter: str = "gap"
    normalization: str = "none"
    pfa: PfaDescriptor | None = None

    def __post_init__(self):
        if len(self.geometry.bodies) < 2:
            raise GeometryError("a separation sweep needs at least two bodies")
        if self.parameter not in ("gap", "separation"):
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if self.normalization != "none" and self.pfa is None:
            raise ValueError(f"normalization {self.normalization!r} needs a PFA descriptor")
        ax = np.asarray(self.axis, dtype=float)
        if ax.shape != (3,) or not np.linalg.norm(ax) > 0:
            raise ValueError("axis must be a non-zero 3-vector")
        self.axis = tuple(ax / np.linalg.norm(ax))
        self.grid = [float(x) for x in self.grid]
        if not self.grid or min(self.grid) <= 0:
            raise ValueError("grid values must be positive")
        self.index = _body_index(self.geometry, self.moving)

    def gap_of(self, geometry: Geometry) -> float:
        i = self.index
        return min(g for (a, b), g in geometry.pair_gaps.items() if i in (a, b))

    def separation_of(self, geometry: Geometry) -> float:
        i = self.index
        j = 0 if i != 0 else 1
        c = geometry.bodies[i].centroid - geometry.bodies[j].centroid
        return float(c @ np.asarray(self.axis))

    def geometry_at(self, value: float) -> Geometry:
        """Base geometry with the moving body shifted to reach ``value``."""
        g0 = self.geometry
        now = self.gap_of(g0) if self.parameter == "gap" else self.separation_of(g0)
        g = g0.translated(self.index, (value - now) * np.asarray(self.axis))
        g.validate()
        return g

    def reference_force(self, gap: float) -> float:
        if self.normalization == "none":
            return float("nan")
        desc = self.pfa.at(gap)
        if self.normalization == "pfa":
            return pfa_force(desc)
        bodies = self.geometry.bodies
        other = bodies[0 if self.index != 0 else 1]
        return lifshitz_pfa_force(desc, other.material, bodies[self.index].material,
                                  self.geometry.medium)


@dataclass
class SweepRow:
    d: float
    F: float
    F_pfa: float
    ratio: float
    err: float
    converged: bool = True
    message: str = ""


def run_separation_sweep(plan: SweepPlan, quad: XiQuadrature | None = None,
                         opts: AssemblyOptions | None = None) -> list:
    """One force evaluation per grid point; failures become NaN rows.

    Returns rows of (d, F, F_pfa, F / F_pfa, error estimate), where d is the
    grid value and F the force on the moving body along the sweep axis.
    """
    quad = quad or XiQuadrature()
    rows = []
    for x in plan.grid:
        try:
            g = plan.geometry_at(x)
            gap = plan.gap_of(g)
            r = casimir_force(g, plan.index, plan.axis, quad, opts)
            ref = plan.reference_force(gap)
            ratio = r.value / ref if plan.normalization != "none" else float("nan")
            rows.append(SweepRow(x, r.value, ref, ratio, r.error, r.converged))
            log.info("sweep %s=%g: F=%.6g ratio=%.6g", plan.parameter, x, r.value, ratio)
        except (CasimirError, ArithmeticError, ValueError) as exc:
            log.error("sweep point %g failed: %s", x, exc)
            nan = float("nan")
            rows.append(SweepRow(x, nan, nan, nan, nan, False, f"{type(exc).__name__}: {exc}"))
    return rows


# --------------------------------------------------------------------------


@dataclass
class LandscapePlan:
    """Two-body rotation grid with fixed centroids.

    Body 0 turns by theta1 about ``axis1`` and body 1 by theta2 about
    ``axis2`` (degrees, axes in the lab frame through each centroid).
    """

    geometry: Geometry
    theta1: Sequence[float]
    theta2: Sequence[float]
    axis1: tuple = (0.0, 1.0, 0.0)
    axis2: tuple = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if len(self.geometry.bodies) != 2:
            raise GeometryError("a rotation landscape needs exactly two bodies")
        self.theta1 = [float(t) for t in self.theta1]
        self.theta2 = [float(t) for t in self.theta2]
        if not self.theta1 or not self.theta2:
            raise ValueError("angle grids must be non-empty")
        for ax in (self.axis1, self.axis2):
            if not np.linalg.norm(np.asarray(ax, dtype=float)) > 0:
                raise ValueError("rotation axes must be non-zero")

    @property
    def points(self) -> list:
        return [(a, b) for a in self.theta1 for b in self.theta2]

    def geometry_at(self, t1: float, t2: float) -> Geometry:
        b0, b1 = self.geometry.bodies
        g = Geometry((b0.rotated(self.axis1, t1), b1.rotated(self.axis2, t2)),
                     self.geometry.medium, check=False)
        g.validate()
        return g


@dataclass
class LandscapeResult:
    theta1: np.ndarray
    theta2: np.ndarray
    energy: np.ndarray            # absolute energies, NaN where failed
    dE: np.ndarray                # relative to the grid minimum
    err: float
    converged: bool
    argmin: tuple
    failures: dict = field(default_factory=dict)

    def rows(self):
        for a, b, e in zip(self.theta1, self.theta2, self.dE):
            yield float(a), float(b), float(e), float(self.err)


def run_rotation_landscape(plan: LandscapePlan, quad: XiQuadrature | None = None,
                           opts: AssemblyOptions | None = None) -> LandscapeResult:
    """Energies over the angle grid, integrated on one shared set of xi nodes.

    Self blocks depend only on the mesh frame and are reused for every
    angle; sharing the xi nodes keeps differences between grid points free
    of quadrature noise. Points that fail get NaN and an entry in
    ``failures``.
    """
    quad = quad or XiQuadrature()
    opts = opts or AssemblyOptions()
    pts = plan.points
    geoms, failures = [], {}
    for p in pts:
        try:
            geoms.append(plan.geometry_at(*p))
        except (CasimirError, ValueError) as exc:
            failures[p] = f"{type(exc).__name__}: {exc}"
            geoms.append(None)
    live = [g for g in geoms if g is not None]
    if not live:
        raise GeometryError("every landscape point failed")
    xi0 = quad.xi0 or max(default_xi0(g) for g in live)
    quad = quad.with_xi0(xi0)
    # rule plans depend on the relative placement, so none are shared here
    point_opts = AssemblyOptions(opts.settings, opts.sign, None, opts.cache)

    def f(xi):
        out = np.zeros(len(pts))
        for k, g in enumerate(geoms):
            if g is None:
                continue
            try:
                out[k] = energy_integrand(g, xi, point_opts).value
            except (CasimirError, ArithmeticError) as exc:
                failures.setdefault(pts[k], f"{type(exc).__name__} at xi={xi:.4g}: {exc}")
                geoms[k] = None
        return out

    r = integrate_xi(f, quad)
    E = np.asarray(r.value, dtype=float) / TWO_PI
    for k, p in enumerate(pts):
        if p in failures:
            E[k] = np.nan
    if np.all(np.isnan(E)):
        raise GeometryError("every landscape point failed")
    k = int(np.nanargmin(E))
    t1 = np.array([p[0] for p in pts])
    t2 = np.array([p[1] for p in pts])
    return LandscapeResult(t1, t2, E, E - E[k], r.error / TWO_PI, r.converged,
                           pts[k], failures)


def landscape_is_flat(result: LandscapeResult, rtol: float) -> bool:
    """True when all energies agree to ``rtol`` of the largest magnitude."""
    E = result.energy[~np.isnan(result.energy)]
    return bool(np.ptp(E) <= rtol * np.max(np.abs(E))) if len(E) else False
