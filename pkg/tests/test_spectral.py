import dataclasses
from types import SimpleNamespace

import numpy as np
import pytest
from conftest import two_spheres
from hypothesis import given
from hypothesis import strategies as st

from casimir_bem.assembly import AssemblyOptions, PlanCache, assemble_dM, assemble_M, assemble_Minf
from casimir_bem.errors import SignMismatchError, SingularMatrixError
from casimir_bem.materials import PEC, Constant
from casimir_bem.spectral import (
    SERIES_NORM,
    Factorization,
    force_trace,
    log_det,
    log_det_inf,
    log_det_ratio,
)


def _spd(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


def test_ratio_examples(dielectric_pair):
    Minf = assemble_Minf(dielectric_pair, 1.0)
    assert log_det_ratio(Minf, Minf) == 0.0
    twice = dataclasses.replace(Minf, matrix=2.0 * Minf.matrix)
    n = Minf.dimension
    assert log_det_ratio(twice, Minf) == pytest.approx(n * np.log(2.0), rel=1e-12)
    A = _spd(6, 0)
    assert log_det_ratio(2 * A, A) == pytest.approx(6 * np.log(2.0), rel=1e-12)


def test_far_pec_spheres_decouple(small_sphere):
    g = two_spheres(small_sphere, PEC(), 20 * 0.5 - 1.0)
    r = log_det_ratio(assemble_M(g, 0.1), assemble_Minf(g, 0.1))
    assert abs(r) < 1e-4


def test_ratio_matches_two_log_dets(dielectric_pair):
    M, Minf = assemble_M(dielectric_pair, 0.7), assemble_Minf(dielectric_pair, 0.7)
    s, full = log_det(M)
    si, inf = log_det_inf(Minf)
    assert s > 0 and si > 0
    assert log_det_ratio(M, Minf) == pytest.approx(full - inf, rel=1e-8)


def test_n_scaling_invariance(dielectric_pair):
    """Rescaling the N unknowns multiplies both determinants by the same factor."""
    M, Minf = assemble_M(dielectric_pair, 1.0), assemble_Minf(dielectric_pair, 1.0)
    s = np.where(M.n_signs() < 0, 10.0, 1.0)
    Ms = dataclasses.replace(M, matrix=s[:, None] * M.matrix * s[None, :])
    Mis = dataclasses.replace(Minf, matrix=s[:, None] * Minf.matrix * s[None, :])
    assert log_det_ratio(Ms, Mis) == pytest.approx(log_det_ratio(M, Minf), rel=1e-8)


@given(st.integers(1, 6), st.integers(0, 10 ** 6), st.floats(1e-4, 0.3), st.booleans())
def test_series_and_lu_agree(k, seed, size, coupled_only):
    """The series branch and the direct factorization give the same log det(I + W)."""
    rng = np.random.default_rng(seed)
    n = 2 * k
    A = np.zeros((n, n))
    A[:k, :k], A[k:, k:] = _spd(k, seed), _spd(k, seed + 1)
    E = rng.standard_normal((n, n))
    if coupled_only:
        E[:k, :k] = E[k:, k:] = 0.0
    E *= size * SERIES_NORM / np.linalg.norm(np.linalg.solve(A, E))
    offsets = np.array([0, k, n])
    got = log_det_ratio(SimpleNamespace(matrix=A + E, offsets=offsets),
                        SimpleNamespace(matrix=A, offsets=offsets))
    ref = np.linalg.slogdet(np.eye(n) + np.linalg.solve(A, E))[1]
    assert got == pytest.approx(ref, rel=1e-10, abs=1e-15)


def test_sign_mismatch_and_singular():
    A = np.eye(3)
    B = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(SignMismatchError):
        log_det_ratio(B, A)
    with pytest.raises(SingularMatrixError), pytest.warns(Warning):
        Factorization.of(np.ones((3, 3)))
    with pytest.raises(SingularMatrixError):
        Factorization.of(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        Factorization.of(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        log_det_ratio(np.eye(2), np.eye(3))


def test_factorization_reconstructs():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((9, 9))
    f = Factorization.of(A)
    P, L, U = f.unpack()
    assert np.linalg.norm(A - P @ L @ U) < 1e-8
    assert np.linalg.norm(P.T @ A - L @ U) < 1e-8
    s, ld = np.linalg.slogdet(A)
    assert f.sign == s and f.logabsdet == pytest.approx(ld, rel=1e-12)


def test_trace_examples():
    rng = np.random.default_rng(7)
    M = rng.standard_normal((8, 8)) + 4 * np.eye(8)
    assert force_trace(M, np.zeros((8, 8))) == 0.0
    assert force_trace(M, M) == pytest.approx(8.0, rel=1e-12)
    dM = rng.standard_normal((8, 8))
    ref = np.trace(np.linalg.inv(M) @ dM)
    assert force_trace(M, dM) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("material", [PEC(), Constant(4.0)])
def test_restricted_trace_matches_full(small_sphere, material):
    g = two_spheres(small_sphere, material, 0.4)
    M = assemble_M(g, 1.1)
    dM = assemble_dM(g, 1.1, 1, (0.3, 0.0, 1.0))
    full = np.trace(np.linalg.solve(M.matrix, dM.matrix))
    assert force_trace(M, dM.matrix) == pytest.approx(full, rel=1e-10)
    assert force_trace(M, dM) == pytest.approx(full, rel=1e-10)
    assert force_trace(M, dM, symmetric=True) == pytest.approx(full, rel=1e-10)


def test_trace_matches_finite_difference(dielectric_pair):
    g, xi = dielectric_pair, 0.8
    opts = AssemblyOptions(plans=PlanCache())
    h = 1e-3 * g.min_gap

    def ratio(shift):
        gs = g.translated(1, (0, 0, shift))
        return log_det_ratio(assemble_M(gs, xi, opts), assemble_Minf(gs, xi, opts))

    fd = (ratio(h) - ratio(-h)) / (2 * h)
    tr = force_trace(assemble_M(g, xi, opts), assemble_dM(g, xi, 1, (0, 0, 1), opts))
    assert tr == pytest.approx(fd, rel=5e-3)
