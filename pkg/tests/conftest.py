"""Shared fixtures: small meshes and geometries that assemble in well under a second."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from casimir_bem.assembly import Body, Geometry
from casimir_bem.materials import PEC, Constant
from casimir_bem.mesh import generate_primitive

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture(scope="session")
def sphere1():
    """Unit icosphere with 80 triangles."""
    return generate_primitive("sphere", (1.0,), 1)


@pytest.fixture(scope="session")
def small_sphere():
    """Icosphere of radius 0.5 with 80 triangles."""
    return generate_primitive("sphere", (0.5,), 1)


@pytest.fixture(scope="session")
def cube():
    return generate_primitive("box", (1.0,), 2)


def two_spheres(mesh, material, gap, medium=None, labels=("a", "b")):
    """Two copies of ``mesh`` (assumed centred) stacked along z with the given gap."""
    r = float(np.max(mesh.vertices[:, 2]))
    kw = {} if medium is None else {"medium": medium}
    return Geometry((Body(labels[0], mesh, material),
                     Body(labels[1], mesh, material, translation=(0, 0, 2 * r + gap))), **kw)


@pytest.fixture(scope="session")
def pec_pair(small_sphere):
    return two_spheres(small_sphere, PEC(), 0.5)


@pytest.fixture(scope="session")
def dielectric_pair(small_sphere):
    return two_spheres(small_sphere, Constant(4.0), 0.5)


# one line per acceptance criterion, printed after the test summary
ACCEPTANCE: dict = {}


def report(number: int, title: str, ok: bool | None, detail: str) -> None:
    """Record an acceptance outcome; ``ok=None`` marks a skipped criterion."""
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    ACCEPTANCE[number] = f"criterion {number} [{status}] {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
