"""Interaction matrix M(xi), its infinite-separation counterpart and dM/dx.

Row layout: bodies in declaration order; inside a body all electric (K)
rows, then all magnetic (N) rows, each in mesh edge order.  PEC bodies carry
K rows only.

For one medium with wavenumber kappa and impedance Z the blocks are

    KK = Z (kappa A + Phi / kappa)
    NN = (kappa A + Phi / kappa) / Z
    KN = s C,   NK = -s C

Same-body blocks add the exterior and interior media; cross-body blocks use
the exterior medium only.
"""
from __future__ import annotations

import struct
import threading
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GeometryError, MaterialError, ResourceLimitError
from .geometry import contains, rotation_matrix, surface_distance
from .kernels.panels import (
    DEFAULT_SETTINGS,
    PairPlan,
    PanelSet,
    QuadratureSettings,
    _LRU,
    cross_blocks,
    cross_derivative_blocks,
    make_plan,
    self_blocks,
)
from .materials import MaterialModel, VACUUM, eval_eps_mu, validate_model
from .mesh import SurfaceMesh

MAX_DIMENSION = 20_000


@dataclass(eq=False)
class Body:
    """A rigidly placed mesh with a material.

    ``rotation`` is a 3x3 proper rotation applied about the origin of the
    mesh frame, followed by ``translation`` (um).
    """

    label: str
    mesh: SurfaceMesh
    material: MaterialModel
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        validate_model(self.material)
        r = self.rotation
        if not (np.allclose(r @ r.T, np.eye(3), atol=1e-9) and np.linalg.det(r) > 0):
            raise GeometryError(f"body {self.label!r}: rotation is not proper orthogonal")

    @classmethod
    def from_axis_angle(cls, label, mesh, material, axis=(0, 0, 1), angle=0.0,
                        translation=(0, 0, 0)):
        return cls(label, mesh, material, rotation_matrix(axis, angle), translation)

    @property
    def is_pec(self) -> bool:
        return self.material.is_pec

    @cached_property
    def frame_panels(self) -> PanelSet:
        """Panels in the mesh frame, used for rigid-motion-invariant self blocks."""
        return _frame_panels(self.mesh)

    @cached_property
    def placed_mesh(self) -> SurfaceMesh:
        return self.mesh.transformed(self.rotation, self.translation)

    @cached_property
    def panels(self) -> PanelSet:
        return PanelSet(self.placed_mesh, self.frame_panels.basis)

    @property
    def n_basis(self) -> int:
        return self.frame_panels.n_basis

    @property
    def n_unknowns(self) -> int:
        return self.n_basis * (1 if self.is_pec else 2)

    def moved(self, translation=None, rotation=None) -> "Body":
        """Copy with a new placement (shares the mesh-frame caches)."""
        b = Body(self.label, self.mesh, self.material,
                 self.rotation if rotation is None else rotation,
                 self.translation if translation is None else translation)
        b.__dict__["frame_panels"] = self.frame_panels
        return b

    @property
    def centroid(self) -> np.ndarray:
        """Area-weighted centroid of the placed surface."""
        m = self.placed_mesh
        return (m.areas[:, None] * m.centroids).sum(0) / m.areas.sum()

    def rotated(self, axis, angle_deg: float, center=None) -> "Body":
        """Copy rotated by ``angle_deg`` about ``axis`` through ``center``.

        ``center`` defaults to the surface centroid, which stays fixed.
        """
        c = self.centroid if center is None else np.asarray(center, dtype=float)
        R = rotation_matrix(axis, angle_deg)
        return self.moved(R @ (self.translation - c) + c, R @ self.rotation)


_frame_cache = _LRU(32)


def _frame_panels(mesh: SurfaceMesh) -> PanelSet:
    key = mesh.content_key
    p = _frame_cache.get(key)
    if p is None:
        p = PanelSet(mesh)
        _frame_cache.put(key, p)
    return p


@dataclass(eq=False)
class Geometry:
    """Ordered bodies in a homogeneous non-PEC medium."""

    bodies: list
    medium: MaterialModel = VACUUM
    check: bool = True

    def __post_init__(self):
        self.bodies = list(self.bodies)
        if not self.bodies:
            raise GeometryError("geometry needs at least one body")
        if self.medium.is_pec:
            raise MaterialError("the exterior medium cannot be PEC")
        validate_model(self.medium)
        labels = [b.label for b in self.bodies]
        if len(set(labels)) != len(labels):
            raise GeometryError(f"duplicate body labels: {labels}")
        dim = sum(b.n_unknowns for b in self.bodies)
        if dim > MAX_DIMENSION:
            raise ResourceLimitError(f"matrix dimension {dim} exceeds cap {MAX_DIMENSION}")
        if self.check:
            self.validate()

    def validate(self) -> None:
        """Reject interpenetrating or nested bodies."""
        gaps = self.pair_gaps
        for (i, j), g in gaps.items():
            bi, bj = self.bodies[i], self.bodies[j]
            if g <= 0.0:
                raise GeometryError(f"bodies {bi.label!r} and {bj.label!r} intersect")
            mi, mj = bi.placed_mesh, bj.placed_mesh
            if contains(mi, mj) or contains(mj, mi):
                raise GeometryError(f"bodies {bi.label!r} and {bj.label!r} are nested")

    @cached_property
    def pair_gaps(self) -> dict:
        out = {}
        n = len(self.bodies)
        for i in range(n):
            for j in range(i + 1, n):
                out[(i, j)] = surface_distance(self.bodies[i].placed_mesh,
                                               self.bodies[j].placed_mesh)
        return out

    @property
    def min_gap(self) -> float:
        """Smallest surface-surface distance; inf for a single body."""
        return min(self.pair_gaps.values(), default=np.inf)

    @property
    def dimension(self) -> int:
        return sum(b.n_unknowns for b in self.bodies)

    @property
    def size(self) -> float:
        """Largest body diameter (rotation invariant, about the vertex mean)."""
        out = 0.0
        for b in self.bodies:
            v = b.mesh.vertices
            out = max(out, 2.0 * float(np.linalg.norm(v - v.mean(0), axis=1).max()))
        return out

    def replace(self, index: int, body: Body, check: bool = False) -> "Geometry":
        bodies = list(self.bodies)
        bodies[index] = body
        return Geometry(bodies, self.medium, check)

    def translated(self, index: int, shift) -> "Geometry":
        b = self.bodies[index]
        return self.replace(index, b.moved(translation=b.translation + np.asarray(shift)))


# --------------------------------------------------------------------------

@dataclass
class BemSystem:
    """Dense real matrix with its row layout."""

    matrix: np.ndarray
    offsets: np.ndarray            # start row of each body
    n_basis: np.ndarray            # basis count per body
    pec: np.ndarray                # bool per body
    labels: tuple = ()
    displaced: int | None = None   # set on derivative matrices

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def body_slice(self, b: int) -> slice:
        return slice(int(self.offsets[b]), int(self.offsets[b + 1]))

    def current_slice(self, b: int, kind: str) -> slice:
        o, n = int(self.offsets[b]), int(self.n_basis[b])
        if kind == "K":
            return slice(o, o + n)
        if kind == "N" and not self.pec[b]:
            return slice(o + n, o + 2 * n)
        raise KeyError(f"body {b} has no {kind} currents")

    def index(self, body: int, basis: int, kind: str) -> int:
        return self.current_slice(body, kind).start + basis

    def n_signs(self) -> np.ndarray:
        """Diagonal of D: +1 on K rows, -1 on N rows."""
        d = np.ones(self.dimension)
        for b in range(len(self.n_basis)):
            if not self.pec[b]:
                d[self.current_slice(b, "N")] = -1.0
        return d


def _layout(bodies):
    sizes = [b.n_unknowns for b in bodies]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    return offsets, np.array([b.n_basis for b in bodies]), np.array([b.is_pec for b in bodies])


@dataclass(frozen=True)
class MediumParams:
    eps: float
    mu: float

    @property
    def n(self) -> float:
        return float(np.sqrt(self.eps * self.mu))

    @property
    def Z(self) -> float:
        return float(np.sqrt(self.mu / self.eps))

    def kappa(self, xi: float) -> float:
        return self.n * xi


def medium_params(material: MaterialModel, xi: float) -> MediumParams:
    eps, mu = eval_eps_mu(material, xi)
    if not (eps > 0 and mu > 0 and np.isfinite(eps) and np.isfinite(mu)):
        raise MaterialError(f"non-physical eps={eps}, mu={mu} at xi={xi}")
    return MediumParams(float(eps), float(mu))


class BlockCache:
    """Self blocks keyed by (mesh content, kappa, settings); LRU bounded."""

    def __init__(self, maxsize: int = 24):
        self._lru = _LRU(maxsize)
        self._locks = {}
        self._guard = threading.Lock()

    def get(self, panels: PanelSet, kappa: float, settings: QuadratureSettings):
        key = (panels.mesh.content_key, float(kappa), settings)
        hit = self._lru.get(key)
        if hit is not None:
            return hit
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            hit = self._lru.get(key)
            if hit is None:
                hit = self_blocks(panels, kappa, settings)
                self._lru.put(key, hit)
        with self._guard:
            self._locks.pop(key, None)
        return hit

    def clear(self):
        self._lru.clear()


SELF_BLOCKS = BlockCache()


class PlanCache:
    """Cross-body quadrature plans keyed by (i, j, kappa).

    Sharing one cache between geometries that differ by small displacements
    keeps the rule choice fixed, so energies vary smoothly with position.
    """

    def __init__(self):
        self._d = {}
        self._lock = threading.Lock()

    def get(self, i, j, kappa, pa, pb, settings) -> PairPlan:
        key = (i, j, float(kappa), settings)
        with self._lock:
            p = self._d.get(key)
        if p is None:
            p = make_plan(pa, pb, kappa, False, settings)
            with self._lock:
                p = self._d.setdefault(key, p)
        return p


def _l_block(blk, med: MediumParams, kappa: float):
    # kappa A + Phi / kappa
    return kappa * blk.A + blk.Phi / kappa


@dataclass
class AssemblyOptions:
    settings: QuadratureSettings = DEFAULT_SETTINGS
    sign: int = 1
    plans: PlanCache | None = None
    cache: BlockCache | None = None


def _opts(opts, geometry=None, kappa=None):
    opts = opts if opts is not None else AssemblyOptions()
    if geometry is None:
        return opts
    s = opts.settings.for_kl(kappa * geometry.size)
    if s is opts.settings:
        return opts
    return AssemblyOptions(s, opts.sign, opts.plans, opts.cache)


def _self_matrix(body: Body, ext: MediumParams, xi: float, opts: AssemblyOptions):
    cache = opts.cache or SELF_BLOCKS
    p = body.frame_panels
    ke = ext.kappa(xi)
    be = cache.get(p, ke, opts.settings)
    Le = _l_block(be, ext, ke)
    if body.is_pec:
        return ext.Z * Le
    inn = medium_params(body.material, xi)
    ki = inn.kappa(xi)
    bi = be if ki == ke else cache.get(p, ki, opts.settings)
    Li = Le if bi is be else _l_block(bi, inn, ki)
    n = p.n_basis
    out = np.empty((2 * n, 2 * n))
    out[:n, :n] = ext.Z * Le + inn.Z * Li
    out[n:, n:] = Le / ext.Z + Li / inn.Z
    C = be.C + bi.C
    out[:n, n:] = opts.sign * C
    out[n:, :n] = -opts.sign * C
    return out


def _cross_matrix(bi: Body, bj: Body, blk, ext: MediumParams, kappa: float, sign: int):
    L = _l_block(blk, ext, kappa)
    ni, nj = bi.n_basis, bj.n_basis
    ri, rj = bi.n_unknowns, bj.n_unknowns
    out = np.zeros((ri, rj))
    out[:ni, :nj] = ext.Z * L
    if not bi.is_pec and not bj.is_pec:
        out[ni:, nj:] = L / ext.Z
    if not bj.is_pec:
        out[:ni, nj:] = sign * blk.C
    if not bi.is_pec:
        out[ni:, :nj] = -sign * blk.C
    return out


def _mirror(block, bi: Body, bj: Body):
    # M_ji = D_j M_ij^T D_i
    di = np.ones(bi.n_unknowns)
    dj = np.ones(bj.n_unknowns)
    if not bi.is_pec:
        di[bi.n_basis:] = -1
    if not bj.is_pec:
        dj[bj.n_basis:] = -1
    return dj[:, None] * block.T * di[None, :]


def _check_xi(xi):
    if not (xi > 0 and np.isfinite(xi)):
        raise ValueError(f"xi must be positive and finite, got {xi}")


def assemble_M(geometry: Geometry, xi: float, opts: AssemblyOptions | None = None,
               cross: bool = True) -> BemSystem:
    """Full interaction matrix at imaginary frequency ``xi`` (1/um)."""
    _check_xi(xi)
    bodies = geometry.bodies
    offsets, nb, pec = _layout(bodies)
    D = int(offsets[-1])
    M = np.zeros((D, D))
    ext = medium_params(geometry.medium, xi)
    ke = ext.kappa(xi)
    opts = _opts(opts, geometry, ke)
    for i, b in enumerate(bodies):
        s = slice(offsets[i], offsets[i + 1])
        M[s, s] = _self_matrix(b, ext, xi, opts)
    if cross:
        for i in range(len(bodies)):
            for j in range(i + 1, len(bodies)):
                pi, pj = bodies[i].panels, bodies[j].panels
                plan = (opts.plans.get(i, j, ke, pi, pj, opts.settings)
                        if opts.plans is not None else None)
                blk = cross_blocks(pi, pj, ke, plan, opts.settings)
                X = _cross_matrix(bodies[i], bodies[j], blk, ext, ke, opts.sign)
                si = slice(offsets[i], offsets[i + 1])
                sj = slice(offsets[j], offsets[j + 1])
                M[si, sj] = X
                M[sj, si] = _mirror(X, bodies[i], bodies[j])
    return BemSystem(M, offsets, nb, pec, tuple(b.label for b in bodies))


def assemble_Minf(geometry: Geometry, xi: float,
                  opts: AssemblyOptions | None = None) -> BemSystem:
    """Block-diagonal matrix with every cross-body block exactly zero."""
    return assemble_M(geometry, xi, opts, cross=False)


def assemble_dM(geometry: Geometry, xi: float, body_index: int, axis,
                opts: AssemblyOptions | None = None) -> BemSystem:
    """Derivative of M under rigid translation of one body along ``axis``."""
    _check_xi(xi)
    bodies = geometry.bodies
    if len(bodies) < 2:
        raise GeometryError("assemble_dM needs at least two bodies")
    if not 0 <= body_index < len(bodies):
        raise IndexError(f"body index {body_index} out of range")
    offsets, nb, pec = _layout(bodies)
    D = int(offsets[-1])
    dM = np.zeros((D, D))
    ext = medium_params(geometry.medium, xi)
    ke = ext.kappa(xi)
    opts = _opts(opts, geometry, ke)
    j = body_index
    bj = bodies[j]
    sj = slice(offsets[j], offsets[j + 1])
    for i, bi in enumerate(bodies):
        if i == j:
            continue
        pi, pj = bi.panels, bj.panels
        plan = None
        if opts.plans is not None:
            if i < j:
                plan = opts.plans.get(i, j, ke, pi, pj, opts.settings)
            else:
                base = opts.plans.get(j, i, ke, pj, pi, opts.settings)
                plan = PairPlan({n: (b_, a_) for n, (a_, b_) in base.groups.items()})
        blk = cross_derivative_blocks(pi, pj, ke, axis, plan, opts.settings)
        X = _cross_matrix(bi, bj, blk, ext, ke, opts.sign)
        si = slice(offsets[i], offsets[i + 1])
        dM[si, sj] = X
        dM[sj, si] = _mirror(X, bi, bj)
    return BemSystem(dM, offsets, nb, pec, tuple(b.label for b in bodies), displaced=j)


def transparent_bodies(geometry: Geometry, xi: float) -> list:
    """Indices of bodies whose (eps, mu) equal the medium's at ``xi``."""
    ext = eval_eps_mu(geometry.medium, xi)
    out = []
    for i, b in enumerate(geometry.bodies):
        if not b.is_pec and tuple(map(float, eval_eps_mu(b.material, xi))) == tuple(map(float, ext)):
            out.append(i)
    return out


# --------------------------------------------------------------------------

def dump_matrix(path, M) -> None:
    """Write a square matrix: 8-byte little-endian dimension, then row-major float64."""
    A = np.ascontiguousarray(M.matrix if isinstance(M, BemSystem) else M, dtype="<f8")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("only square matrices can be dumped")
    with open(Path(path), "wb") as fh:
        fh.write(struct.pack("<q", A.shape[0]))
        fh.write(A.tobytes(order="C"))


def load_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (n,) = struct.unpack("<q", data[:8])
    if len(data) != 8 + 8 * n * n:
        raise ValueError(f"{path}: size does not match header dimension {n}")
    return np.frombuffer(data[8:], dtype="<f8").reshape(n, n).copy()
