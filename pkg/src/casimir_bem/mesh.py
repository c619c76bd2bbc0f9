"""Closed triangulated surfaces and the RWG basis built on them.

Lengths are in micrometers throughout.  Meshes are immutable after
construction and validated on creation: every edge must be shared by
exactly two triangles with opposite traversal, and no triangle may be
degenerate.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DegenerateTriangleError,
    MeshParseError,
    MeshTopologyError,
    ResourceLimitError,
)

MIN_TRIANGLE_AREA = 1e-12
MAX_TRIANGLES = 200_000


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Closed oriented triangulation of one body's surface.

    Attributes
    ----------
    vertices : (V, 3) float array
    triangles : (F, 3) int array, outward normal by the right-hand rule
    edges : (E, 2) int array of vertex pairs, ``edges[:, 0] < edges[:, 1]``
    edge_triangles : (E, 2) int array; column 0 is the triangle that
        traverses the edge in ascending vertex order (T+), column 1 the other.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray = field(init=False)
    edge_triangles: np.ndarray = field(init=False)
    genus: int = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshParseError(f"vertices must have shape (V, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
            raise MeshParseError(f"triangles must have shape (F, 3), got {t.shape}")
        if t.min() < 0 or t.max() >= len(v):
            raise MeshParseError("triangle references a vertex index out of range")
        if not np.all(np.isfinite(v)):
            raise MeshParseError("non-finite vertex coordinate")
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        edges, edge_tris = _build_edges(t)
        edges.flags.writeable = False
        edge_tris.flags.writeable = False
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "edge_triangles", edge_tris)

        area = self.areas
        bad = np.flatnonzero(area <= MIN_TRIANGLE_AREA)
        if len(bad):
            raise DegenerateTriangleError(
                f"{len(bad)} degenerate triangle(s), first is #{bad[0]} "
                f"with area {area[bad[0]]:.3g} um^2"
            )
        n_vert = len(np.unique(t))
        chi = n_vert - len(edges) + len(t)
        if chi > 2 or chi % 2:
            raise MeshTopologyError(f"Euler characteristic {chi} is not 2 - 2g")
        object.__setattr__(self, "genus", (2 - chi) // 2)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def euler_characteristic(self) -> int:
        return len(np.unique(self.triangles)) - self.n_edges + self.n_triangles

    @cached_property
    def corners(self) -> np.ndarray:
        """(F, 3, 3) array of triangle vertex coordinates."""
        return self.vertices[self.triangles]

    @cached_property
    def _cross(self) -> np.ndarray:
        c = self.corners
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        return self._cross / (2.0 * self.areas[:, None])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def diameters(self) -> np.ndarray:
        """Longest edge of each triangle."""
        c = self.corners
        d = np.stack(
            [np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
             np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
             np.linalg.norm(c[:, 0] - c[:, 2], axis=1)], axis=1)
        return d.max(axis=1)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def surface_centroid(self) -> np.ndarray:
        """Area-weighted centroid of the surface."""
        a = self.areas
        return (a[:, None] * self.centroids).sum(axis=0) / a.sum()

    @cached_property
    def volume(self) -> float:
        c = self.corners
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    @cached_property
    def content_key(self) -> str:
        """Hash of the geometry; equal meshes share cached interaction blocks."""
        h = hashlib.sha1()
        h.update(self.vertices.tobytes())
        h.update(self.triangles.tobytes())
        return h.hexdigest()

    def transformed(self, rotation: np.ndarray | None = None,
                    translation=None) -> "SurfaceMesh":
        """Return a rigidly moved copy: x -> R x + t."""
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return SurfaceMesh(v, self.triangles)

    def scaled(self, factor: float) -> "SurfaceMesh":
        return SurfaceMesh(self.vertices * float(factor), self.triangles)


def _build_edges(tris: np.ndarray):
    half = tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    owner = np.repeat(np.arange(len(tris)), 3)
    lo = half.min(axis=1)
    hi = half.max(axis=1)
    nv = int(tris.max()) + 1
    key = lo * nv + hi
    order = np.argsort(key, kind="stable")
    key_s = key[order]
    uniq, start, counts = np.unique(key_s, return_index=True, return_counts=True)
    if np.any(counts != 2):
        n_open = int(np.sum(counts == 1))
        n_multi = int(np.sum(counts > 2))
        if n_multi:
            raise MeshTopologyError(
                f"non-manifold mesh: {n_multi} edge(s) shared by more than two triangles")
        raise MeshTopologyError(f"open surface: {n_open} boundary edge(s)")
    first = order[start]
    second = order[start + 1]
    ascending_first = half[first, 0] < half[first, 1]
    ascending_second = half[second, 0] < half[second, 1]
    if np.any(ascending_first == ascending_second):
        raise MeshTopologyError("inconsistent triangle orientation across an edge")
    tplus = np.where(ascending_first, owner[first], owner[second])
    tminus = np.where(ascending_first, owner[second], owner[first])
    edges = np.stack([uniq // nv, uniq % nv], axis=1)
    return edges, np.stack([tplus, tminus], axis=1)


# --------------------------------------------------------------------------
# file formats
# --------------------------------------------------------------------------

def load_mesh(path, format: str | None = None) -> SurfaceMesh:
    """Read an OFF or Gmsh v2.2 ASCII file and return a validated mesh."""
    path = Path(path)
    if format is None:
        format = {".off": "off", ".msh": "msh2"}.get(path.suffix.lower())
        if format is None:
            raise MeshParseError(f"cannot infer mesh format from {path.name}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise MeshParseError(f"cannot read mesh file {path}: {exc}") from exc
    if format == "off":
        v, t = parse_off(text)
    elif format in ("msh", "msh2"):
        v, t = parse_msh2(text)
    else:
        raise MeshParseError(f"unknown mesh format {format!r}")
    return SurfaceMesh(v, t)


def _tokens(text: str):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def parse_off(text: str):
    lines = list(_tokens(text))
    if not lines or not lines[0].startswith("OFF"):
        raise MeshParseError("missing OFF header")
    head = lines[0][3:].split()
    rest = lines[1:]
    if not head:
        if not rest:
            raise MeshParseError("missing OFF counts line")
        head, rest = rest[0].split(), rest[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError) as exc:
        raise MeshParseError(f"bad OFF counts line: {head}") from exc
    if len(rest) < nv + nf:
        raise MeshParseError(f"OFF file truncated: expected {nv + nf} data lines, got {len(rest)}")
    try:
        verts = np.array([[float(x) for x in ln.split()[:3]] for ln in rest[:nv]])
    except ValueError as exc:
        raise MeshParseError(f"bad OFF vertex line: {exc}") from exc
    if verts.shape != (nv, 3):
        raise MeshParseError("OFF vertex line with fewer than 3 coordinates")
    faces = []
    for ln in rest[nv:nv + nf]:
        parts = ln.split()
        try:
            n = int(parts[0])
            idx = [int(p) for p in parts[1:1 + n]]
        except (ValueError, IndexError) as exc:
            raise MeshParseError(f"bad OFF face line: {ln!r}") from exc
        if n != 3 or len(idx) != 3:
            raise MeshParseError(f"only triangular faces are supported, got {ln!r}")
        faces.append(idx)
    return verts, np.array(faces, dtype=np.int64)


def _section(lines, name):
    try:
        i = lines.index(f"${name}")
        j = lines.index(f"$End{name}", i)
    except ValueError:
        raise MeshParseError(f"missing ${name} section") from None
    return lines[i + 1:j]


def parse_msh2(text: str):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    fmt = _section(lines, "MeshFormat")
    if not fmt or not fmt[0].split()[0].startswith("2"):
        raise MeshParseError("only MSH version 2.x ASCII is supported")
    if len(fmt[0].split()) > 1 and fmt[0].split()[1] != "0":
        raise MeshParseError("binary MSH files are not supported")
    try:
        nodes = _section(lines, "Nodes")
        n = int(nodes[0])
        ids, coords = [], []
        for ln in nodes[1:n + 1]:
            p = ln.split()
            ids.append(int(p[0]))
            coords.append([float(p[1]), float(p[2]), float(p[3])])
        elements = _section(lines, "Elements")
        m = int(elements[0])
        tris, skipped = [], {}
        for ln in elements[1:m + 1]:
            p = [int(x) for x in ln.split()]
            etype, ntags = p[1], p[2]
            if etype == 2:
                tris.append(p[3 + ntags:6 + ntags])
            else:
                skipped[etype] = skipped.get(etype, 0) + 1
    except (ValueError, IndexError) as exc:
        raise MeshParseError(f"malformed MSH file: {exc}") from exc
    if len(ids) != n:
        raise MeshParseError("MSH node section truncated")
    if skipped:
        warnings.warn(f"ignored non-triangle MSH elements (type: count) {skipped}",
                      stacklevel=3)
    index = {nid: k for k, nid in enumerate(ids)}
    try:
        t = np.array([[index[i] for i in tri] for tri in tris], dtype=np.int64)
    except KeyError as exc:
        raise MeshParseError(f"element references unknown node {exc}") from exc
    return np.array(coords, dtype=float), t


def write_off(path, mesh: SurfaceMesh) -> None:
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_triangles} 0\n")
        for x in mesh.vertices:
            fh.write(" ".join(repr(float(c)) for c in x) + "\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


# --------------------------------------------------------------------------
# primitives
# --------------------------------------------------------------------------

class _VertexPool:
    """Deduplicates vertices by rounded coordinates."""

    def __init__(self, tol=1e-9):
        self.tol = tol
        self.points = []
        self.index = {}

    def add(self, p):
        key = tuple(np.round(np.asarray(p) / self.tol).astype(np.int64))
        k = self.index.get(key)
        if k is None:
            k = self.index[key] = len(self.points)
            self.points.append(np.asarray(p, dtype=float))
        return k


def _orient_outward(vertices, triangles, center):
    c = vertices[triangles]
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    out = np.einsum("ij,ij->i", n, c.mean(axis=1) - center)
    flip = out < 0
    tri = triangles.copy()
    tri[flip] = tri[flip][:, ::-1]
    return tri


def _icosphere(radius, level):
    phi = (1 + 5 ** 0.5) / 2
    verts = [(-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
             (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
             (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1)]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(level):
        mid = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in mid:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                mid[key] = len(verts) - 1
            return mid[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return radius * np.array(verts), np.array(faces, dtype=np.int64)


def _box(lx, ly, lz, n):
    pool = _VertexPool()
    half = np.array([lx, ly, lz]) / 2
    tris = []
    s = np.linspace(-1.0, 1.0, n + 1)
    for axis in range(3):
        u_ax, v_ax = [a for a in range(3) if a != axis]
        for sign in (-1.0, 1.0):
            grid = np.empty((n + 1, n + 1), dtype=np.int64)
            for i in range(n + 1):
                for j in range(n + 1):
                    p = np.zeros(3)
                    p[axis] = sign
                    p[u_ax] = s[i]
                    p[v_ax] = s[j]
                    grid[i, j] = pool.add(p * half)
            for i in range(n):
                for j in range(n):
                    a, b, c, d = grid[i, j], grid[i + 1, j], grid[i + 1, j + 1], grid[i, j + 1]
                    tris += [(a, b, c), (a, c, d)]
    return np.array(pool.points), np.array(tris, dtype=np.int64)


def _strip(ring_a, ang_a, ring_b, ang_b):
    """Triangulate the band between two closed vertex rings by angle merging."""
    if len(ring_a) == 1 or len(ring_b) == 1:
        apex, ring = (ring_a[0], ring_b) if len(ring_a) == 1 else (ring_b[0], ring_a)
        return [(apex, ring[i], ring[(i + 1) % len(ring)]) for i in range(len(ring))]
    tris = []
    na, nb = len(ring_a), len(ring_b)
    i = j = 0
    while i < na or j < nb:
        next_a = ang_a[i + 1] if i + 1 < na else ang_a[0] + 2 * np.pi
        next_b = ang_b[j + 1] if j + 1 < nb else ang_b[0] + 2 * np.pi
        if j >= nb or (i < na and next_a <= next_b):
            tris.append((ring_a[i % na], ring_a[(i + 1) % na], ring_b[j % nb]))
            i += 1
        else:
            tris.append((ring_a[i % na], ring_b[(j + 1) % nb], ring_b[j % nb]))
            j += 1
    return tris


def _puck(radius, thickness, k):
    n_seg = 6 * k
    edge = 2 * np.pi * radius / n_seg
    layers = max(1, int(round(thickness / edge)))
    pts, tris = [], []

    def ring(r, z, count):
        if count == 1:
            pts.append((0.0, 0.0, z))
            return [len(pts) - 1], np.array([0.0])
        ang = 2 * np.pi * np.arange(count) / count
        start = len(pts)
        pts.extend((r * np.cos(a), r * np.sin(a), z) for a in ang)
        return list(range(start, start + count)), ang

    zt, zb = thickness / 2, -thickness / 2
    # top cap rings, inner to outer
    top = [ring(radius * j / k, zt, max(1, 6 * j)) for j in range(k + 1)]
    bottom = [ring(radius * j / k, zb, max(1, 6 * j)) for j in range(k + 1)]
    side = [top[-1]]
    for layer in range(1, layers):
        side.append(ring(radius, zt - thickness * layer / layers, n_seg))
    side.append(bottom[-1])
    for rings in (top, bottom):
        for (ra, aa), (rb, ab) in zip(rings[:-1], rings[1:]):
            tris += _strip(ra, aa, rb, ab)
    for (ra, aa), (rb, ab) in zip(side[:-1], side[1:]):
        tris += _strip(ra, aa, rb, ab)
    return np.array(pts), np.array(tris, dtype=np.int64)


def _grade_sphere(v, radius, grading, pole):
    """Conformal warp of sphere vertices toward ``pole``.

    The polar angle from the pole maps as tan(t'/2) = grading * tan(t/2),
    a stereographic scaling: edges near the pole shrink by ``grading`` and
    near the antipode grow by 1 / ``grading`` while triangle shapes are kept.
    """
    p = np.asarray(pole, dtype=float)
    p = p / np.linalg.norm(p)
    u = v / radius
    c = u @ p
    w = u - c[:, None] * p
    sn = np.linalg.norm(w, axis=1)
    ok = sn > 1e-12
    t_new = 2.0 * np.arctan2(grading * sn, 1.0 + c)
    out = u.copy()
    out[ok] = (np.cos(t_new[ok])[:, None] * p
               + np.sin(t_new[ok])[:, None] * w[ok] / sn[ok, None])
    return radius * out


@lru_cache(maxsize=64)
def _primitive_cached(kind, dims, resolution, grading=1.0, pole=(0.0, 0.0, 1.0)):
    if kind == "sphere":
        (radius,) = dims
        v, t = _icosphere(radius, resolution)
        if grading != 1.0:
            v = _grade_sphere(v, radius, grading, pole)
    elif kind == "box":
        v, t = _box(*dims, resolution)
    elif kind == "puck":
        v, t = _puck(*dims, resolution)
    else:
        raise ValueError(f"unknown primitive kind {kind!r}")
    return SurfaceMesh(v, _orient_outward(v, t, np.zeros(3)))


def primitive_triangle_count(kind: str, resolution: int) -> int | None:
    if kind == "sphere":
        return 20 * 4 ** resolution
    if kind == "box":
        return 12 * resolution ** 2
    return None


def generate_primitive(kind: str, dims, resolution: int,
                       max_triangles: int = MAX_TRIANGLES, grading: float = 1.0,
                       pole=(0.0, 0.0, 1.0)) -> SurfaceMesh:
    """Build a closed genus-0 primitive centred at the origin.

    ``sphere``: dims = (radius,), icosphere with ``resolution`` subdivisions.
    ``grading`` in (0, 1] refines it conformally toward the direction
    ``pole`` (edges there shrink by that factor), which suits narrow gaps.
    ``box``: dims = (lx, ly, lz) or (side,), each face split into
    resolution^2 quads of two triangles.
    ``puck``: dims = (radius, thickness), a cylinder along z with 6*resolution
    segments around its rim.
    """
    dims = tuple(float(d) for d in np.atleast_1d(dims))
    if kind == "box" and len(dims) == 1:
        dims = dims * 3
    expected = {"sphere": 1, "box": 3, "puck": 2}.get(kind)
    if expected is None:
        raise ConfigError(f"unknown primitive kind {kind!r}")
    if len(dims) != expected or min(dims) <= 0:
        raise ConfigError(f"{kind} needs {expected} positive dimension(s), got {dims}")
    if int(resolution) != resolution or resolution < 1:
        raise ConfigError("resolution must be a positive integer")
    resolution = int(resolution)
    count = primitive_triangle_count(kind, resolution)
    if count is None:  # puck: rough upper bound before building
        k = resolution
        layers = max(1, round(dims[1] / (2 * math.pi * dims[0] / (6 * k))))
        count = 2 * 6 * k * k + 2 * 6 * k * layers
    if count > max_triangles:
        raise ResourceLimitError(
            f"{kind} at resolution {resolution} needs {count} triangles "
            f"(cap {max_triangles})")
    grading = float(grading)
    if not 0.0 < grading <= 1.0:
        raise ConfigError(f"grading must lie in (0, 1], got {grading}")
    pole = tuple(float(x) for x in pole)
    if grading != 1.0:
        if kind != "sphere":
            raise ConfigError("grading is only available for spheres")
        if len(pole) != 3 or not np.linalg.norm(pole) > 0:
            raise ConfigError("pole must be a non-zero 3-vector")
    return _primitive_cached(kind, dims, resolution, grading, pole)


# --------------------------------------------------------------------------
# RWG basis
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RwgBasisSet:
    """One RWG function per (interior) mesh edge.

    ``f_a(x) = l_a/(2 A+) (x - p+)`` on T+ and ``l_a/(2 A-) (p- - x)`` on T-,
    so that the current flows from T+ into T- across the edge.
    """

    mesh: SurfaceMesh
    tplus: np.ndarray
    tminus: np.ndarray
    free_plus: np.ndarray      # vertex index opposite the edge in T+
    free_minus: np.ndarray
    length: np.ndarray
    area_plus: np.ndarray
    area_minus: np.ndarray
    tri_basis: np.ndarray      # (F, 3): basis index of the edge opposite local vertex k
    tri_sign: np.ndarray       # (F, 3): +1 if the triangle is T+ of that basis, else -1

    def __len__(self):
        return len(self.length)

    @property
    def size(self) -> int:
        return len(self.length)

    def evaluate(self, alpha: int, points: np.ndarray, triangle: int) -> np.ndarray:
        """Value of f_alpha at points lying on ``triangle``."""
        points = np.atleast_2d(points)
        m = self.mesh
        if triangle == self.tplus[alpha]:
            p, a, s = m.vertices[self.free_plus[alpha]], self.area_plus[alpha], 1.0
        elif triangle == self.tminus[alpha]:
            p, a, s = m.vertices[self.free_minus[alpha]], self.area_minus[alpha], -1.0
        else:
            return np.zeros_like(points)
        return s * self.length[alpha] / (2 * a) * (points - p)

    def divergence(self, alpha: int, triangle: int) -> float:
        if triangle == self.tplus[alpha]:
            return self.length[alpha] / self.area_plus[alpha]
        if triangle == self.tminus[alpha]:
            return -self.length[alpha] / self.area_minus[alpha]
        return 0.0


def build_rwg_basis(mesh: SurfaceMesh) -> RwgBasisSet:
    tri = mesh.triangles
    e = mesh.edges
    tp, tm = mesh.edge_triangles[:, 0], mesh.edge_triangles[:, 1]

    def free_vertex(t):
        rows = tri[t]
        mask = (rows != e[:, :1]) & (rows != e[:, 1:])
        return rows[mask]

    fp, fm = free_vertex(tp), free_vertex(tm)
    length = np.linalg.norm(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]], axis=1)

    nv = mesh.n_vertices
    edge_id = {int(k): i for i, k in enumerate(e[:, 0] * nv + e[:, 1])}
    tri_basis = np.empty_like(tri)
    tri_sign = np.empty(tri.shape, dtype=float)
    for k in range(3):
        a, b = tri[:, (k + 1) % 3], tri[:, (k + 2) % 3]
        keys = np.minimum(a, b) * nv + np.maximum(a, b)
        idx = np.array([edge_id[int(x)] for x in keys], dtype=np.int64)
        tri_basis[:, k] = idx
        tri_sign[:, k] = np.where(tp[idx] == np.arange(len(tri)), 1.0, -1.0)
    for arr in (tri_basis, tri_sign):
        arr.flags.writeable = False
    return RwgBasisSet(mesh, tp, tm, fp, fm, length, mesh.areas[tp], mesh.areas[tm],
                       tri_basis, tri_sign)
