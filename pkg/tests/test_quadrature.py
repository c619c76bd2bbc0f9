import math

import numpy as np
import pytest
from conftest import two_spheres
from hypothesis import given
from hypothesis import strategies as st

from casimir_bem.assembly import AssemblyOptions, Body, Geometry
from casimir_bem.errors import NumericalError
from casimir_bem.materials import PEC, VACUUM, Constant
from casimir_bem.mesh import generate_primitive
from casimir_bem.quadrature import (
    XiQuadrature,
    casimir_energies,
    casimir_energy,
    casimir_force,
    default_xi0,
    effective_xi,
    energy_integrand,
    force_integrand,
    integrate_xi,
)


@pytest.mark.parametrize("f,exact", [
    (lambda x: math.exp(-x), 1.0),
    (lambda x: x * x * math.exp(-2 * x), 0.25),
    (lambda x: 1.0 / (1.0 + x * x), math.pi / 2),
])
def test_integrate_xi_analytic(f, exact):
    r = integrate_xi(f, XiQuadrature(1.0, rtol=1e-9))
    assert r.converged
    assert r.value == pytest.approx(exact, rel=1e-6)
    assert all(x > 0 and math.isfinite(x) for x, _ in r.samples)
    assert r.n_evals == len(r.samples)


@given(st.floats(0.05, 20.0))
def test_integrate_xi_any_scale(a):
    r = integrate_xi(lambda x: math.exp(-a * x), XiQuadrature(1.0, rtol=1e-8))
    assert r.value == pytest.approx(1.0 / a, rel=1e-6)


def test_vector_integrand_and_workers():
    f = lambda x: np.array([math.exp(-x), x * math.exp(-3 * x)])
    one = integrate_xi(f, XiQuadrature(1.0, rtol=1e-8))
    many = integrate_xi(f, XiQuadrature(1.0, rtol=1e-8, workers=4))
    assert one.value == pytest.approx([1.0, 1 / 9], rel=1e-7)
    assert [x for x, _ in one.samples] == [x for x, _ in many.samples]
    assert np.array_equal(one.value, many.value)


def test_budget_and_errors():
    wiggly = lambda x: abs(math.sin(50 * x)) * math.exp(-x)
    r = integrate_xi(wiggly, XiQuadrature(1.0, rtol=1e-12, max_evals=45))
    assert not r.converged and r.n_evals <= 45
    with pytest.raises(NumericalError):
        integrate_xi(lambda x: float("nan"), XiQuadrature(1.0))
    for kw in (dict(xi0=0.0), dict(rtol=-1.0), dict(max_evals=10), dict(workers=0)):
        with pytest.raises(ValueError):
            XiQuadrature(**kw)
    with pytest.raises(ValueError):
        integrate_xi(math.exp, XiQuadrature())


def test_single_body_energy_is_zero(sphere1):
    g = Geometry((Body("s", sphere1, PEC()),))
    r = casimir_energy(g)
    assert r.value == 0.0 and r.converged
    assert default_xi0(g) == pytest.approx(0.5)


def test_zero_contrast_energy(small_sphere):
    g = two_spheres(small_sphere, VACUUM, 0.4)
    assert abs(casimir_energy(g).value) < 1e-6
    g2 = two_spheres(small_sphere, Constant(3.0), 0.4, medium=Constant(3.0))
    assert abs(casimir_energy(g2).value) < 1e-6


@pytest.mark.slow
def test_pec_energy_sign_and_decay():
    mesh = generate_primitive("sphere", (1.0,), 2)
    E = [casimir_energy(two_spheres(mesh, PEC(), d)).value for d in (0.5, 1.0, 2.0)]
    assert all(e < 0 for e in E)
    assert abs(E[0]) > abs(E[1]) > abs(E[2])


def test_high_frequency_tail(small_sphere):
    """The xi > 20 / d part of the integral is below 1e-4 of the total."""
    d = 0.4
    g = two_spheres(small_sphere, PEC(), d)
    r = casimir_energy(g, XiQuadrature(rtol=1e-6, max_evals=400))
    xs = np.array([s.xi for s in r.samples])
    fs = np.array([s.value for s in r.samples])
    # integrand decays at least as exp(-2 xi d): tail <= f(xi_c) / (2 d)
    xc = 20.0 / d
    f_c = abs(energy_integrand(g, xc).value)
    assert f_c / (2 * d) / (2 * math.pi) < 1e-4 * abs(r.value)
    beyond = xs > xc
    assert np.all(np.abs(fs[beyond]) <= f_c)


def _xi_999(res):
    """xi below which 99.9% of the integral lies, from the sample record."""
    xs = np.array([s.xi for s in res.samples])
    fs = np.array([s.value for s in res.samples])
    o = np.argsort(xs)
    xs, fs = xs[o], fs[o]
    u = xs / (xs + res.xi0)
    g = fs * res.xi0 / (1 - u) ** 2
    u = np.concatenate([[0.0], u, [1.0]])
    g = np.concatenate([[g[0]], g, [0.0]])
    c = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(u))])
    uu = np.interp(0.999, c / c[-1], u)
    return res.xi0 * uu / (1 - uu)


def test_exponential_tail_scales_with_gap(small_sphere):
    q = XiQuadrature(rtol=1e-6, max_evals=400)
    x1 = _xi_999(casimir_energy(two_spheres(small_sphere, PEC(), 0.5), q))
    x2 = _xi_999(casimir_energy(two_spheres(small_sphere, PEC(), 1.0), q))
    assert x2 / x1 == pytest.approx(0.5, abs=0.1)


def test_force_symmetry(pec_pair):
    along = casimir_force(pec_pair, 1, (0, 0, 1)).value
    across = casimir_force(pec_pair, 1, (1, 0, 0)).value
    assert along < 0
    assert abs(across) < 1e-3 * abs(along)
    other = casimir_force(pec_pair, 0, (0, 0, 1)).value
    assert other == pytest.approx(-along, rel=1e-3)


def test_low_frequency_limit(dielectric_pair, pec_pair):
    for g in (dielectric_pair, pec_pair):
        d = g.min_gap
        a = energy_integrand(g, 1e-6 / d).value
        b = energy_integrand(g, 1e-5 / d).value
        assert math.isfinite(a) and a == pytest.approx(b, rel=0.1)
    s = AssemblyOptions().settings
    assert effective_xi(pec_pair, 1e-9, s) == pytest.approx(s.min_kl / pec_pair.size)
    assert effective_xi(pec_pair, 5.0, s) == 5.0


def test_pec_scale_invariance(small_sphere):
    lam = 2.0
    E1 = casimir_energy(two_spheres(small_sphere, PEC(), 0.4)).value
    E2 = casimir_energy(two_spheres(small_sphere.scaled(lam), PEC(), 0.4 * lam)).value
    assert E2 == pytest.approx(E1 / lam, rel=1e-8)


def test_force_matches_energy_difference(dielectric_pair):
    g = dielectric_pair
    h = 1e-3 * g.min_gap
    Ep, Em = casimir_energies([g.translated(1, (0, 0, h)), g.translated(1, (0, 0, -h))])
    F = casimir_force(g, 1, (0, 0, 1))
    assert F.value == pytest.approx(-(Ep.value - Em.value) / (2 * h), rel=5e-3)


def test_integrand_far_apart_and_records(pec_pair):
    far = pec_pair.translated(1, (0, 0, 100.0))
    assert energy_integrand(far, 1.0).value == 0.0
    assert force_integrand(far, 1.0, 1, (0, 0, 1)) == 0.0
    s = energy_integrand(pec_pair, 1.0, record_logdets=True)
    assert s.logdet_M - s.logdet_Minf == pytest.approx(s.value, rel=1e-10)
    with pytest.raises(ValueError):
        casimir_force(Geometry((pec_pair.bodies[0],)), 0)
    with pytest.raises(IndexError):
        casimir_force(pec_pair, 2)
    with pytest.raises(ValueError):
        casimir_force(pec_pair, 1, (0, 0, 0))
