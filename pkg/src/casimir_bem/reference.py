"""Closed-form and semi-analytic baselines.

Proximity-force approximations, the zero-temperature Lifshitz formula for
half-spaces and Casimir-Polder asymptotes for small spheres.  Units are
hbar = c = 1 with lengths in um; negative forces are attractive.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import NumericalError
from .materials import MaterialModel, eval_eps_mu

PI2 = math.pi ** 2
PI3 = math.pi ** 3

Q_SPAN = 35.0
# absolute floor for the dimensionless outer integral (PEC value is pi^4/45 for the energy)
ABS_FLOOR = 1e-16

KINDS = ("plate-plate", "sphere-sphere", "sphere-plate", "cube-cube")


@dataclass(frozen=True)
class PfaDescriptor:
    """Geometry class and gap for a PFA estimate.

    Parameters
    ----------
    kind : {'plate-plate', 'sphere-sphere', 'sphere-plate', 'cube-cube'}
    d : float
        Surface-surface gap (um).
    R1, R2 : float
        Sphere radii; ``R2`` only for sphere-sphere.
    area : float
        Face area for cube-cube.
    """

    kind: str
    d: float
    R1: float = 0.0
    R2: float = 0.0
    area: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown PFA geometry {self.kind!r}; expected one of {KINDS}")
        if not self.d > 0:
            raise ValueError("gap d must be positive")
        if self.kind == "sphere-sphere" and not (self.R1 > 0 and self.R2 > 0):
            raise ValueError("sphere-sphere needs R1 > 0 and R2 > 0")
        if self.kind == "sphere-plate" and not self.R1 > 0:
            raise ValueError("sphere-plate needs R1 > 0")
        if self.kind == "cube-cube" and not self.area > 0:
            raise ValueError("cube-cube needs a positive face area")

    @property
    def r_eff(self) -> float:
        if self.kind == "sphere-sphere":
            return self.R1 * self.R2 / (self.R1 + self.R2)
        return self.R1

    def at(self, d: float) -> "PfaDescriptor":
        return PfaDescriptor(self.kind, d, self.R1, self.R2, self.area)


def pfa_force(desc: PfaDescriptor) -> float:
    """Perfect-conductor PFA force.

    Plate-plate returns the pressure (per unit area); the other classes
    return the total force.
    """
    d = desc.d
    if desc.kind == "plate-plate":
        return -PI2 / (240.0 * d ** 4)
    if desc.kind == "cube-cube":
        return -PI2 * desc.area / (240.0 * d ** 4)
    return -PI3 * desc.r_eff / (360.0 * d ** 3)


def pfa_energy(desc: PfaDescriptor) -> float:
    """Perfect-conductor PFA energy (per unit area for plate-plate)."""
    d = desc.d
    if desc.kind == "plate-plate":
        return -PI2 / (720.0 * d ** 3)
    if desc.kind == "cube-cube":
        return -PI2 * desc.area / (720.0 * d ** 3)
    return -PI3 * desc.r_eff / (720.0 * d ** 2)


# --------------------------------------------------------------------------
# Lifshitz


def _response(m: MaterialModel, xi: float):
    return None if m.is_pec else eval_eps_mu(m, xi)


def _fresnel(resp, e3, m3, q3, k2, xi):
    """(r_TE, r_TM) of one half-space seen from the medium."""
    if resp is None:
        return -1.0, 1.0
    e, m = resp
    if e == e3 and m == m3:
        return 0.0, 0.0
    q = math.sqrt(k2 + e * m * xi * xi)
    return (m * q3 - m3 * q) / (m * q3 + m3 * q), (e * q3 - e3 * q) / (e * q3 + e3 * q)


def _lifshitz(mat1, mat2, medium, d, power, rtol):
    if not d > 0:
        raise ValueError("gap d must be positive")
    if medium.is_pec:
        raise ValueError("the medium cannot be PEC")

    def inner(x):
        # dimensionless x = xi d and q = q3 d; k dk = q3 dq3 in the medium
        xi = x / d
        r1, r2 = _response(mat1, xi), _response(mat2, xi)
        e3, m3 = eval_eps_mu(medium, xi)
        q0 = math.sqrt(e3 * m3) * x

        def f(q):
            k2 = max(q * q - q0 * q0, 0.0) / d ** 2
            a_te, a_tm = _fresnel(r1, e3, m3, q / d, k2, xi)
            b_te, b_tm = _fresnel(r2, e3, m3, q / d, k2, xi)
            e = math.exp(-2.0 * q)
            tot = 0.0
            for rr in (a_te * b_te, a_tm * b_tm):
                if rr != 0.0:
                    if power == 0:
                        tot += math.log1p(-rr * e)
                    else:
                        tot += q * rr * e / (1.0 - rr * e)
            return q * tot

        # exp(-2 q) is below 1e-30 past q0 + Q_SPAN
        return quad(f, q0, q0 + Q_SPAN, epsabs=0.0, epsrel=rtol, limit=200)[0]

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val = quad(inner, 0.0, np.inf, epsabs=ABS_FLOOR, epsrel=rtol, limit=200)[0]
        except IntegrationWarning as exc:
            raise NumericalError(f"Lifshitz quadrature did not converge: {exc}") from exc
    return val


def lifshitz_energy(mat1: MaterialModel, mat2: MaterialModel, medium: MaterialModel,
                    d: float, rtol: float = 1e-10) -> float:
    """Zero-temperature interaction energy per unit area of two half-spaces.

    E/A = 1/(4 pi^2) int dxi int k dk sum_p log(1 - r1 r2 exp(-2 q3 d)).
    """
    return _lifshitz(mat1, mat2, medium, d, 0, rtol) / (4.0 * PI2 * d ** 3)


def lifshitz_pressure(mat1: MaterialModel, mat2: MaterialModel, medium: MaterialModel,
                      d: float, rtol: float = 1e-10) -> float:
    """Zero-temperature Casimir pressure between two half-spaces across ``medium``.

    Uses TE/TM Fresnel coefficients at imaginary frequency; PEC sides have
    r_TE = -1 and r_TM = +1.  Negative values are attractive.

    Examples
    --------
    >>> from casimir_bem.materials import PEC, VACUUM
    >>> p = lifshitz_pressure(PEC(), PEC(), VACUUM, 1.0)
    >>> abs(p / (-math.pi ** 2 / 240) - 1) < 1e-8
    True
    """
    return -_lifshitz(mat1, mat2, medium, d, 1, rtol) / (2.0 * PI2 * d ** 4)


def lifshitz_pfa_force(desc: PfaDescriptor, mat1, mat2, medium, rtol: float = 1e-8) -> float:
    """PFA force built from the Lifshitz half-space result.

    Sphere geometries use the Derjaguin form 2 pi R_eff E/A(d); plates and
    cubes use the pressure times the area (1 for plates).
    """
    if desc.kind in ("plate-plate", "cube-cube"):
        area = desc.area if desc.kind == "cube-cube" else 1.0
        return area * lifshitz_pressure(mat1, mat2, medium, desc.d, rtol)
    return 2.0 * math.pi * desc.r_eff * lifshitz_energy(mat1, mat2, medium, desc.d, rtol)


# --------------------------------------------------------------------------
# Casimir-Polder limits for small spheres


def cp_energy_pec_spheres(R1: float, R2: float, D: float) -> float:
    """Large-separation energy of two PEC spheres at center distance ``D``.

    Uses the static electric and magnetic polarizabilities R^3 and -R^3/2:
    E = -(143 / 16 pi) R1^3 R2^3 / D^7.
    """
    return -143.0 * R1 ** 3 * R2 ** 3 / (16.0 * math.pi * D ** 7)


def cp_energy_dielectric_spheres(R1: float, eps1: float, R2: float, eps2: float,
                                 D: float) -> float:
    """Large-separation energy of two non-magnetic dielectric spheres.

    E = -23 a1 a2 / (4 pi D^7) with a = R^3 (eps - 1) / (eps + 2).
    """
    a1 = R1 ** 3 * (eps1 - 1.0) / (eps1 + 2.0)
    a2 = R2 ** 3 * (eps2 - 1.0) / (eps2 + 2.0)
    return -23.0 * a1 * a2 / (4.0 * math.pi * D ** 7)
