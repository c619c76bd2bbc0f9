import math

import numpy as np
import pytest
from conftest import two_spheres

from casimir_bem.assembly import Body, Geometry
from casimir_bem.errors import GeometryError
from casimir_bem.materials import PEC, VACUUM, Constant
from casimir_bem.mesh import generate_primitive
from casimir_bem.quadrature import XiQuadrature, casimir_energy
from casimir_bem.reference import PfaDescriptor
from casimir_bem.sweeps import (
    LandscapePlan,
    SweepPlan,
    landscape_is_flat,
    run_rotation_landscape,
    run_separation_sweep,
)

R = 0.5


def _plan(geometry, moving="b", axis=(0, 0, 1), **kw):
    kw.setdefault("normalization", "pfa")
    kw.setdefault("pfa", PfaDescriptor("sphere-sphere", 1.0, R, R))
    return SweepPlan(geometry, moving, [0.2 * R, 0.4 * R, 0.8 * R], axis, **kw)


def test_pec_sweep_ratio():
    """Meshes graded toward the gap resolve the near-contact region."""
    lo = generate_primitive("sphere", (R,), 1, grading=0.3, pole=(0, 0, 1))
    hi = generate_primitive("sphere", (R,), 1, grading=0.3, pole=(0, 0, -1))
    g = Geometry((Body("a", lo, PEC()), Body("b", hi, PEC(), translation=(0, 0, 2 * R + 0.3))))
    rows = run_separation_sweep(_plan(g))
    ratios = [r.ratio for r in rows]
    assert [r.d for r in rows] == [0.1, 0.2, 0.4]
    assert all(0 < q < 1 for q in ratios)
    assert ratios[0] > ratios[1] > ratios[2]
    assert all(r.converged and r.F < 0 < r.F / r.F_pfa for r in rows)


def test_zero_contrast_sweep(small_sphere):
    rows = run_separation_sweep(_plan(two_spheres(small_sphere, VACUUM, 0.3)))
    assert all(abs(r.ratio) < 1e-6 for r in rows)


def test_swapping_bodies_keeps_ratios(small_sphere):
    g = two_spheres(small_sphere, Constant(3.0), 0.3)
    swapped = Geometry(tuple(reversed(g.bodies)), g.medium)
    a = run_separation_sweep(_plan(g, "b", normalization="lifshitz-pfa"))
    b = run_separation_sweep(_plan(swapped, "b", normalization="lifshitz-pfa"))
    for ra, rb in zip(a, b):
        assert rb.ratio == pytest.approx(ra.ratio, rel=1e-6)


def test_separation_parameter_and_failures(small_sphere):
    g = two_spheres(small_sphere, PEC(), 0.3)
    plan = SweepPlan(g, 1, [1.5, 0.5], parameter="separation")
    assert plan.separation_of(plan.geometry_at(1.5)) == pytest.approx(1.5)
    rows = run_separation_sweep(plan, XiQuadrature(max_evals=15))
    assert rows[0].d == 1.5 and math.isnan(rows[0].ratio)
    # S = 0.5 < 2R makes the spheres overlap: the point fails, the sweep goes on
    assert math.isnan(rows[1].F) and "GeometryError" in rows[1].message


@pytest.mark.parametrize("kw", [
    dict(parameter="angle"), dict(normalization="exact"), dict(normalization="pfa", pfa=None),
    dict(axis=(0, 0, 0)), dict(grid=[]), dict(grid=[-1.0]), dict(moving="zz"), dict(moving=5),
])
def test_sweep_plan_validation(pec_pair, kw):
    args = dict(geometry=pec_pair, moving="b", grid=[0.1])
    args.update(kw)
    with pytest.raises((ValueError, GeometryError)):
        SweepPlan(**args)
    with pytest.raises(GeometryError):
        SweepPlan(Geometry((pec_pair.bodies[0],)), 0, [0.1])


def test_identical_spheres_flat_landscape(small_sphere):
    g = Geometry((Body("l", small_sphere, Constant(3.0)),
                  Body("r", small_sphere, Constant(3.0), translation=(1.5, 0, 0))))
    res = run_rotation_landscape(LandscapePlan(g, [0, 45, 90], [0, 90], (0, 0, 1), (0, 0, 1)))
    assert res.converged and not res.failures
    assert landscape_is_flat(res, 1e-3)
    assert np.nanmin(res.dE) == 0.0


def _pucks(separation=0.5, eps=(2.5, 2.5)):
    puck = generate_primitive("puck", (0.2, 0.08), 1)
    return Geometry((
        Body.from_axis_angle("p1", puck, Constant(eps[0]), (0, 1, 0), 90.0),
        Body.from_axis_angle("p2", puck, Constant(eps[1]), (0, 1, 0), 90.0,
                             translation=(separation, 0, 0))))


def test_puck_half_turn_symmetry():
    plan = LandscapePlan(_pucks(), [0.0, 180.0], [0.0, 180.0], (0, 0, 1), (0, 0, 1))
    res = run_rotation_landscape(plan)
    E = dict(zip(zip(res.theta1, res.theta2), res.energy))
    assert E[(180.0, 180.0)] == pytest.approx(E[(0.0, 0.0)], rel=1e-3)


def test_landscape_mirror_symmetry():
    angles = [-60.0, -30.0, 30.0, 60.0]
    plan = LandscapePlan(_pucks(eps=(2.5, 6.0)), angles, angles, (0, 0, 1), (0, 0, 1))
    res = run_rotation_landscape(plan)
    E = dict(zip(zip(res.theta1, res.theta2), res.energy))
    for (a, b), e in E.items():
        assert E[(-a, -b)] == pytest.approx(e, rel=1e-3)
    assert res.argmin in E
    assert len(list(res.rows())) == 16


def test_landscape_matches_single_energy():
    g = _pucks()
    plan = LandscapePlan(g, [30.0], [0.0], (0, 0, 1), (0, 0, 1))
    res = run_rotation_landscape(plan)
    ref = casimir_energy(plan.geometry_at(30.0, 0.0))
    assert res.energy[0] == pytest.approx(ref.value, rel=1e-3)


def test_landscape_failures_are_recorded():
    g = _pucks(separation=0.25)
    plan = LandscapePlan(g, [0.0, 90.0], [90.0], (0, 0, 1), (0, 0, 1))
    res = run_rotation_landscape(plan)
    # turned by 90 degrees both discs lie in the x-z plane and reach into each other
    assert list(res.failures) == [(90.0, 90.0)] and math.isnan(res.energy[1])
    assert math.isfinite(res.energy[0]) and res.argmin == (0.0, 90.0)
    with pytest.raises(GeometryError):
        LandscapePlan(Geometry((g.bodies[0],)), [0.0], [0.0])
    with pytest.raises(ValueError):
        LandscapePlan(g, [], [0.0])
