"""Quadrature rules, singular integrals and backend agreement."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from casimir_bem.kernels import backend, panel_pair, panel_pair_derivative, scalar_kernel
from casimir_bem.kernels import _fallback
from casimir_bem.kernels.api import classify_pair, triangle_pair_moments
from casimir_bem.kernels.panels import (
    DEFAULT_SETTINGS,
    PanelSet,
    QuadratureSettings,
    cross_blocks,
    cross_derivative_blocks,
    self_blocks,
)
from casimir_bem.kernels.rules import (
    TRIANGLE_RULE_DEGREE,
    TRIANGLE_RULE_SIZES,
    gauss_legendre01,
    gk15,
    sauter_schwab_rule,
    triangle_rule,
)
from casimir_bem.geometry import rotation_matrix
from casimir_bem.mesh import generate_primitive

HAVE_CYTHON = True
try:
    from casimir_bem.kernels import _core  # noqa: F401
except ImportError:  # pragma: no cover
    HAVE_CYTHON = False


# --------------------------------------------------------------------------
# independent oracle: potential of a uniform triangle (closed form)


def triangle_potential(p, tri):
    """Integral of 1/|p - y| over triangle ``tri`` (3, 3), any point p."""
    a, b, c = tri
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n)
    d = (p - a) @ n
    rho = p - d * n
    total = 0.0
    for v0, v1 in ((a, b), (b, c), (c, a)):
        L = v1 - v0
        l_hat = L / np.linalg.norm(L)
        u = np.cross(l_hat, n)
        P0 = (v0 - rho) @ u
        lp, lm = (v1 - rho) @ l_hat, (v0 - rho) @ l_hat
        R0sq = P0 * P0 + d * d
        Rp, Rm = math.sqrt(lp * lp + R0sq), math.sqrt(lm * lm + R0sq)
        if abs(P0) > 1e-14:
            total += P0 * math.log((Rp + lp) / (Rm + lm))
        if abs(d) > 1e-14:
            total -= abs(d) * (math.atan(P0 * lp / (R0sq + abs(d) * Rp))
                               - math.atan(P0 * lm / (R0sq + abs(d) * Rm)))
    return total


def _subdivide(tri, levels):
    tris = [tri]
    for _ in range(levels):
        nxt = []
        for a, b, c in tris:
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            nxt += [np.array(t) for t in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
        tris = nxt
    return tris


def _outer(tri_a, tri_b, levels):
    bary, w = triangle_rule(13)
    tot = 0.0
    for t in _subdivide(tri_a, levels):
        area = 0.5 * np.linalg.norm(np.cross(t[1] - t[0], t[2] - t[0]))
        for x, wk in zip(bary @ t, w):
            tot += area * wk * triangle_potential(x, tri_b)
    return tot / (4 * math.pi)


def oracle_static(tri_a, tri_b):
    """Integral over a of the analytic potential of b, divided by 4 pi.

    The potential has log-singular derivatives on the edges of b, so the
    outer rule converges as h^2; two levels are Richardson-extrapolated.
    """
    return (4.0 * _outer(tri_a, tri_b, 5) - _outer(tri_a, tri_b, 4)) / 3.0


@pytest.fixture(scope="module")
def panels():
    return PanelSet(generate_primitive("sphere", (1.0,), 1))


# --------------------------------------------------------------------------
# rules


@pytest.mark.parametrize("n", TRIANGLE_RULE_SIZES)
def test_triangle_rule_exactness(n):
    bary, w = triangle_rule(n)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(bary >= 0) and np.allclose(bary.sum(1), 1.0)
    deg = TRIANGLE_RULE_DEGREE[n]
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            exact = 2.0 * math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
            got = w @ (bary[:, 0] ** i * bary[:, 1] ** j)
            assert got == pytest.approx(exact, rel=1e-12, abs=1e-15)


def test_gauss_rules():
    x, w = gauss_legendre01(6)
    for k in range(12):
        assert w @ x ** k == pytest.approx(1 / (k + 1), rel=1e-13)
    x, wk, wg = gk15(-1.0, 3.0)
    for k in range(23):
        assert wk @ x ** k == pytest.approx((3.0 ** (k + 1) - (-1.0) ** (k + 1)) / (k + 1),
                                            rel=1e-12)
    for k in range(14):
        assert wg @ x ** k == pytest.approx((3.0 ** (k + 1) - (-1.0) ** (k + 1)) / (k + 1),
                                            rel=1e-12)


@pytest.mark.parametrize("kind", ["coincident", "edge", "vertex"])
@pytest.mark.parametrize("grade", [1.0, 8.0])
def test_sauter_schwab_weights(kind, grade):
    ba, bb, w = sauter_schwab_rule(kind, 5, grade)
    assert w.sum() == pytest.approx(0.25, rel=1e-13)
    assert np.all(w > 0)
    assert np.allclose(ba.sum(1), 1) and np.allclose(bb.sum(1), 1)
    assert ba.min() > -1e-14 and bb.min() > -1e-14
    # linear moments of each triangle are exact: mean barycentric is 1/3
    assert np.allclose((w @ ba) / w.sum(), 1 / 3, atol=1e-13)
    assert np.allclose((w @ bb) / w.sum(), 1 / 3, atol=1e-13)
    with pytest.raises(ValueError):
        sauter_schwab_rule("disjoint", 5)


def test_triangle_rule_unknown():
    with pytest.raises(ValueError):
        triangle_rule(4)


# --------------------------------------------------------------------------
# kernel


@given(st.floats(1e-3, 10.0), st.floats(0.0, 20.0))
def test_scalar_kernel_derivative(r, kappa):
    g, dg = scalar_kernel(r, kappa)
    h = 1e-6 * r
    fd = (scalar_kernel(r + h, kappa)[0] - scalar_kernel(r - h, kappa)[0]) / (2 * h)
    assert g == pytest.approx(math.exp(-kappa * r) / (4 * math.pi * r), rel=1e-14)
    assert dg == pytest.approx(fd, rel=1e-6, abs=1e-12)


def test_scalar_kernel_domain():
    with pytest.raises(ValueError):
        scalar_kernel(0.0, 1.0)
    with pytest.raises(ValueError):
        scalar_kernel(1.0, -1.0)


def test_remainder_mode_is_full_minus_static():
    R = np.random.default_rng(0).normal(size=(50, 3))
    k = 2.5
    g, v = _fallback.kernel_values(R, k, _fallback.FULL)
    g0, v0 = _fallback.kernel_values(R, k, _fallback.STATIC)
    gr, vr = _fallback.kernel_values(R, k, _fallback.REMAINDER)
    assert np.allclose(g - g0, gr, rtol=1e-10, atol=1e-14)
    assert np.allclose(v - v0, vr, rtol=1e-8, atol=1e-12)
    gz, vz = _fallback.kernel_values(np.zeros((1, 3)), k, _fallback.REMAINDER)
    assert gz[0] == pytest.approx(-k / (4 * math.pi)) and np.all(vz == 0)


# --------------------------------------------------------------------------
# singular Galerkin integrals against the analytic oracle


def _pair_with(panels, kind):
    tri = panels.mesh.triangles
    for tb in range(panels.n_triangles):
        if classify_pair(panels, 0, panels, tb) == kind:
            return 0, tb
    raise AssertionError(kind)


@pytest.mark.parametrize("kind", ["coincident", "edge", "vertex", "disjoint"])
def test_static_singular_integral_matches_oracle(panels, kind):
    if kind == "disjoint":
        ta, tb = 0, int(np.argmin(panels.centroids @ panels.centroids[0]))
        m = triangle_pair_moments(panels, ta, panels, tb, 0.0, rule=13)
    else:
        ta, tb = _pair_with(panels, kind)
        m = triangle_pair_moments(panels, ta, panels, tb, 0.0)
    ref = oracle_static(panels.corners[ta], panels.corners[tb])
    assert m[0] == pytest.approx(ref, rel=2e-6)


_DYNAMIC_REF = {}


def _remainder(tri_a, tri_b, kappa, levels):
    bary, w = triangle_rule(13)
    tot = 0.0
    for sa in _subdivide(tri_a, levels):
        aa = 0.5 * np.linalg.norm(np.cross(sa[1] - sa[0], sa[2] - sa[0]))
        xa = bary @ sa
        for sb in _subdivide(tri_b, levels):
            ab = 0.5 * np.linalg.norm(np.cross(sb[1] - sb[0], sb[2] - sb[0]))
            R = xa[:, None, :] - (bary @ sb)[None, :, :]
            g, _ = _fallback.kernel_values(R, kappa, _fallback.REMAINDER)
            tot += aa * ab * (w @ g @ w)
    return tot


@pytest.mark.parametrize("kind", ["coincident", "edge"])
@pytest.mark.parametrize("kappa", [0.7, 12.0])
@pytest.mark.parametrize("settings, rtol", [(DEFAULT_SETTINGS, 1e-4),
                                             (QuadratureSettings(full_order=8), 1e-6)])
def test_dynamic_singular_integral(panels, kind, kappa, settings, rtol):
    ta, tb = _pair_with(panels, kind)
    m = triangle_pair_moments(panels, ta, panels, tb, kappa, settings=settings)
    key = (kind, kappa)
    if key not in _DYNAMIC_REF:
        # static part from the oracle; the bounded remainder has a kink at
        # r = 0, so the fine regular rule converges as h^3 and is extrapolated
        a, b = panels.corners[ta], panels.corners[tb]
        r3, r4 = _remainder(a, b, kappa, 3), _remainder(a, b, kappa, 4)
        _DYNAMIC_REF[key] = oracle_static(a, b) + (8.0 * r4 - r3) / 7.0
    assert m[0] == pytest.approx(_DYNAMIC_REF[key], rel=rtol)


def test_galerkin_blocks_are_symmetric(panels):
    b = self_blocks(panels, 1.3)
    assert np.allclose(b.A, b.A.T, atol=1e-14 * np.abs(b.A).max())
    assert np.allclose(b.Phi, b.Phi.T, atol=1e-14 * np.abs(b.Phi).max())
    # swapping x and y flips grad g and the triple product: C is symmetric too
    assert np.allclose(b.C, b.C.T, atol=1e-14 * np.abs(b.C).max())


def test_panel_pair_matches_blocks(panels):
    b = self_blocks(panels, 1.3)
    for alpha, beta in ((0, 0), (0, 1), (3, 40), (10, 100)):
        p = panel_pair(panels, alpha, panels, beta, 1.3)
        assert p.A == pytest.approx(b.A[alpha, beta], rel=1e-6)
        assert p.Phi == pytest.approx(b.Phi[alpha, beta], rel=1e-6)
        # blocks mirror each touching pair, panel_pair evaluates both orders,
        # so they differ at the level of the singular-rule error
        assert p.C == pytest.approx(b.C[alpha, beta], rel=1e-5, abs=1e-5 * np.abs(b.C).max())


def test_derivative_matches_finite_difference(panels):
    mesh = panels.mesh
    axis = np.array([0.3, -0.2, 1.0])
    axis /= np.linalg.norm(axis)
    shift = np.array([0.0, 0.0, 2.6])

    def pb(h):
        return PanelSet(mesh.transformed(translation=shift + h * axis), panels.basis)

    h = 1e-5
    for alpha, beta in ((0, 5), (17, 90)):
        d = panel_pair_derivative(panels, alpha, pb(0.0), beta, 0.8, axis, rule=7)
        plus = panel_pair(panels, alpha, pb(h), beta, 0.8, rule=7)
        minus = panel_pair(panels, alpha, pb(-h), beta, 0.8, rule=7)
        for name in ("A", "Phi", "C"):
            fd = (getattr(plus, name) - getattr(minus, name)) / (2 * h)
            assert getattr(d, name) == pytest.approx(fd, rel=1e-6, abs=1e-10)
    with pytest.raises(ValueError):
        panel_pair_derivative(panels, 0, panels, 1, 1.0, axis)

    # block version
    far = pb(0.0)
    s = QuadratureSettings()
    dB = cross_derivative_blocks(panels, far, 0.8, axis, settings=s)
    Bp, Bm = cross_blocks(panels, pb(h), 0.8, settings=s), cross_blocks(panels, pb(-h), 0.8,
                                                                       settings=s)
    assert np.allclose(dB.A, (Bp.A - Bm.A) / (2 * h), rtol=1e-5, atol=1e-9)
    assert np.allclose(dB.Phi, (Bp.Phi - Bm.Phi) / (2 * h), rtol=1e-5, atol=1e-9)


# --------------------------------------------------------------------------
# compiled backend agrees with numpy


@pytest.mark.skipif(not HAVE_CYTHON, reason="compiled extension not built")
@pytest.mark.parametrize("mode", [_fallback.FULL, _fallback.DERIV])
def test_backends_agree_regular(panels, mode):
    pts, w = panels.rule_points(7)
    rng = np.random.default_rng(1)
    far = PanelSet(panels.mesh.transformed(translation=(0, 0, 2.4)), panels.basis)
    fpts, fw = far.rule_points(7)
    ia = rng.integers(0, 80, 200)
    ib = rng.integers(0, 80, 200)
    out = {}
    for name in ("python", "cython"):
        backend.use(name)
        out[name] = backend.regular_moments(pts, w, panels.centroids, fpts, fw, far.centroids,
                                            ia, ib, 1.7, mode, np.array([0.0, 0.6, 0.8]))
    backend.use("cython")
    scale = np.abs(out["python"]).max()
    assert np.all(np.abs(out["python"] - out["cython"]) <= 1e-13 * scale)


@pytest.mark.skipif(not HAVE_CYTHON, reason="compiled extension not built")
@pytest.mark.parametrize("mode", [_fallback.FULL, _fallback.REMAINDER, _fallback.STATIC])
def test_backends_agree_singular(panels, mode):
    from casimir_bem.kernels.panels import touching_pairs
    tp = touching_pairs(panels.mesh)["edge"]
    ba, bb, ws = sauter_schwab_rule("edge", 4)
    scale = 4.0 * panels.areas[tp.ta] * panels.areas[tp.tb]
    out = {}
    for name in ("python", "cython"):
        backend.use(name)
        out[name] = backend.singular_moments(tp.corn_a, tp.corn_b, panels.centroids[tp.ta],
                                             panels.centroids[tp.tb], ba, bb, ws, scale,
                                             3.0, mode)
    backend.use("cython")
    scale = np.abs(out["python"]).max()
    assert np.all(np.abs(out["python"] - out["cython"]) <= 1e-13 * scale)


@pytest.mark.skipif(not HAVE_CYTHON, reason="compiled extension not built")
def test_backends_agree_self_blocks(panels):
    res = {}
    for name in ("python", "cython"):
        backend.use(name)
        res[name] = self_blocks(panels, 2.0, DEFAULT_SETTINGS)
    backend.use("cython")
    for f in ("A", "Phi", "C"):
        a, b = getattr(res["python"], f), getattr(res["cython"], f)
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_backend_selection():
    with pytest.raises(ValueError):
        backend.use("fortran")
    assert backend.NAME in ("python", "cython")


# --------------------------------------------------------------------------
# examples and invariants of the kernel contract


def test_scalar_kernel_examples():
    assert scalar_kernel(1.0, 0.0)[0] == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    assert scalar_kernel(1.0, 1.0)[0] == pytest.approx(math.exp(-1) / (4 * math.pi), rel=1e-15)
    h = 1e-6
    fd = (scalar_kernel(2.0 + h, 0.5)[0] - scalar_kernel(2.0 - h, 0.5)[0]) / (2 * h)
    assert scalar_kernel(2.0, 0.5)[1] == pytest.approx(fd, rel=1e-8)


def test_unit_right_triangle_coincident():
    box = PanelSet(generate_primitive("box", (1.0,), 1))
    t = 0
    legs = sorted(np.linalg.norm(np.roll(box.corners[t], 1, axis=0) - box.corners[t], axis=1))
    assert legs[:2] == pytest.approx([1.0, 1.0])
    m = triangle_pair_moments(box, t, box, t, 0.0)
    assert m[0] == pytest.approx(oracle_static(box.corners[t], box.corners[t]), rel=1e-6)
    assert np.all(m[8:] == 0.0)


def _rwg_integral(p, alpha):
    b, V = p.basis, p.mesh.vertices
    cp = p.centroids[b.tplus[alpha]]
    cm = p.centroids[b.tminus[alpha]]
    return 0.5 * b.length[alpha] * ((cp - V[b.free_plus[alpha]]) + (V[b.free_minus[alpha]] - cm))


def test_far_field_limits(panels):
    mesh = panels.mesh
    D = 100.0 * 2.0
    far = PanelSet(mesh.transformed(translation=(0, 0, D)), panels.basis)
    for alpha, beta in ((0, 0), (5, 77)):
        Ia, Ib = _rwg_integral(panels, alpha), _rwg_integral(far, beta)
        R = np.linalg.norm(panels.centroids[panels.basis.tplus[alpha]]
                           - far.centroids[far.basis.tplus[beta]])
        g, dg = scalar_kernel(R, 0.0)
        A = panel_pair(panels, alpha, far, beta, 0.0).A
        assert A == pytest.approx((Ia @ Ib) * g, rel=1e-3)
        dA = panel_pair_derivative(panels, alpha, far, beta, 0.0, (0, 0, 1)).A
        assert dA == pytest.approx((Ia @ Ib) * dg, rel=2e-2)


def test_exchange_symmetry(panels):
    other = PanelSet(panels.mesh.transformed(rotation_matrix((1, 0, 0), 30.0), (0.3, 0, 2.5)),
                     panels.basis)
    for alpha, beta in ((0, 3), (50, 119)):
        for rule in (3, 7):
            ab = panel_pair(panels, alpha, other, beta, 0.9, rule=rule)
            ba = panel_pair(other, beta, panels, alpha, 0.9, rule=rule)
            assert abs(ab.A - ba.A) < 1e-12 and abs(ab.Phi - ba.Phi) < 1e-12


@pytest.mark.parametrize("ratio", [4.5, 11.0])
def test_regular_rule_convergence(panels, ratio):
    mesh = panels.mesh
    diam = panels.diameters.max()
    far = PanelSet(mesh.transformed(translation=(0, 0, 2 + ratio * diam)), panels.basis)
    zmid = mesh.vertices[mesh.edges].mean(1)[:, 2]
    a, b = int(np.argmax(zmid)), int(np.argmin(zmid))
    seq = [panel_pair(panels, a, far, b, 0.7, rule=n) for n in (3, 7, 13, 52)]
    for name in ("A", "Phi"):
        diffs = [abs(getattr(x, name) - getattr(seq[-1], name)) for x in seq[:-1]]
        assert diffs[0] > diffs[1] > diffs[2]
        assert diffs[2] < 1e-8 * abs(getattr(seq[-1], name))


def test_static_self_terms_positive(panels):
    b = self_blocks(panels, 1e-8)
    assert np.all(np.diag(b.A) > 0) and np.all(np.diag(b.Phi) > 0)
    # the static scalar-potential operator is positive semidefinite
    assert np.linalg.eigvalsh(b.Phi).min() > -1e-12 * np.abs(b.Phi).max()


def test_derivative_vanishes_by_mirror_symmetry():
    box = generate_primitive("box", (1.0,), 2)
    pa = PanelSet(box)
    pb = PanelSet(box.transformed(translation=(10.0, 0.0, 0.0)), pa.basis)
    on_top = np.all(np.abs(box.vertices[box.edges][:, :, 2] - 0.5) < 1e-12, axis=1)
    flat = [a for a in np.flatnonzero(on_top)
            if np.all(np.abs(box.centroids[[pa.basis.tplus[a], pa.basis.tminus[a]], 2] - 0.5)
                      < 1e-12)]
    alpha = int(flat[0])
    d = panel_pair_derivative(pa, alpha, pb, alpha, 0.5, (0, 0, 1))
    ref = panel_pair_derivative(pa, alpha, pb, alpha, 0.5, (1, 0, 0))
    assert abs(d.A) < 1e-12 * abs(ref.A) + 1e-18
